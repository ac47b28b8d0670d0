#pragma once

#include <complex>
#include <map>
#include <stdexcept>
#include <vector>

#include "forr/fwht.hpp"
#include "forr/graph.hpp"
#include "forr/tree_decomposition.hpp"

namespace forr {

// Product of per-edge and per-vertex complex factors over a graph, alphabet
// {0,..,d-1}. Edge tables are row-major with the smaller endpoint first.
struct TwoLocalFunction {
    Graph graph;
    int d = 2;
    cplx scalar{1.0, 0.0};
    std::vector<std::vector<cplx>> vertex_terms;  // [v] -> d values
    std::vector<std::vector<cplx>> edge_terms;    // parallel to graph.edges, d*d values

    static TwoLocalFunction ones(Graph g, int d = 2) {
        TwoLocalFunction h;
        h.d = d;
        h.vertex_terms.assign(g.n, std::vector<cplx>(d, cplx(1)));
        h.edge_terms.assign(g.edges.size(), std::vector<cplx>(size_t(d) * d, cplx(1)));
        h.graph = std::move(g);
        return h;
    }

    std::vector<cplx>& edge_term(int u, int v) {
        int e = graph.edge_index(u, v);
        if (e < 0) throw std::invalid_argument("edge_term: no such edge");
        return edge_terms[e];
    }

    // value of the (u,v) table at assignment (a at u, b at v)
    cplx edge_value(int e, int a_small, int a_big) const {
        return edge_terms[e][size_t(a_small) * d + a_big];
    }

    cplx eval(const std::vector<int>& x) const {
        if (int(x.size()) != graph.n) throw std::invalid_argument("eval: assignment length mismatch");
        cplx p = scalar;
        for (int v = 0; v < graph.n; ++v) p *= vertex_terms[v][x[v]];
        for (size_t e = 0; e < graph.edges.size(); ++e) {
            auto [u, v] = graph.edges[e];
            p *= edge_value(int(e), x[u], x[v]);
        }
        return p;
    }

    // binary convenience: bit v of x is the value at vertex v (d == 2)
    cplx eval_bits(uint64_t x) const {
        cplx p = scalar;
        for (int v = 0; v < graph.n; ++v) p *= vertex_terms[v][(x >> v) & 1];
        for (size_t e = 0; e < graph.edges.size(); ++e) {
            auto [u, v] = graph.edges[e];
            p *= edge_terms[e][((x >> u) & 1) * 2 + ((x >> v) & 1)];
        }
        return p;
    }
};

struct Restriction {
    TwoLocalFunction h;              // on the induced subgraph of free vertices
    std::vector<int> old_of_new;
    std::vector<int> new_of_old;     // -1 for fixed vertices
};

// Fixes a partial assignment (-1 = free). Cross edges fold into the free
// endpoint's vertex term, fixed-fixed edges and fixed vertex terms fold into
// the scalar.
inline Restriction restrict_function(const TwoLocalFunction& h, const std::vector<int>& fixed) {
    if (int(fixed.size()) != h.graph.n) throw std::invalid_argument("restrict: assignment length mismatch");
    Restriction r;
    for (int v = 0; v < h.graph.n; ++v)
        if (fixed[v] < 0) r.old_of_new.push_back(v);
    auto [sub, local] = h.graph.induced(r.old_of_new);
    r.new_of_old = local;
    r.h.d = h.d;
    r.h.scalar = h.scalar;
    r.h.vertex_terms.assign(sub.n, {});
    for (int v = 0; v < sub.n; ++v) r.h.vertex_terms[v] = h.vertex_terms[r.old_of_new[v]];
    r.h.edge_terms.assign(sub.edges.size(), {});
    r.h.graph = std::move(sub);

    for (int v = 0; v < h.graph.n; ++v)
        if (fixed[v] >= 0) r.h.scalar *= h.vertex_terms[v][fixed[v]];

    for (size_t e = 0; e < h.graph.edges.size(); ++e) {
        auto [u, v] = h.graph.edges[e];
        bool fu = fixed[u] >= 0, fv = fixed[v] >= 0;
        if (fu && fv) {
            r.h.scalar *= h.edge_value(int(e), fixed[u], fixed[v]);
        } else if (fu) {
            auto& t = r.h.vertex_terms[local[v]];
            for (int b = 0; b < h.d; ++b) t[b] *= h.edge_value(int(e), fixed[u], b);
        } else if (fv) {
            auto& t = r.h.vertex_terms[local[u]];
            for (int a = 0; a < h.d; ++a) t[a] *= h.edge_value(int(e), a, fixed[v]);
        } else {
            r.h.edge_terms[r.h.graph.edge_index(local[u], local[v])] = h.edge_terms[e];
        }
    }
    return r;
}

// Sum over all assignments of a two-local function on a forest, by iterated
// leaf contraction. Runtime O(m |Gamma|^2).
inline cplx sum_tree(const TwoLocalFunction& h) {
    const int n = h.graph.n;
    const int d = h.d;
    auto adj = h.graph.adjacency();
    std::vector<std::vector<cplx>> vterm = h.vertex_terms;
    std::vector<int> degree(n);
    for (int v = 0; v < n; ++v) degree[v] = int(adj[v].size());
    std::vector<char> done(n, 0);
    std::vector<int> leaves;
    for (int v = 0; v < n; ++v)
        if (degree[v] == 1) leaves.push_back(v);

    int edges_left = int(h.graph.edges.size());
    std::vector<char> edge_done(h.graph.edges.size(), 0);
    while (!leaves.empty()) {
        int u = leaves.back();
        leaves.pop_back();
        if (done[u] || degree[u] != 1) continue;
        int v = -1;
        for (int w : adj[u])
            if (!done[w]) { v = w; break; }
        if (v < 0) continue;
        int e = h.graph.edge_index(u, v);
        edge_done[e] = 1;
        --edges_left;
        for (int b = 0; b < d; ++b) {
            cplx acc = 0;
            for (int a = 0; a < d; ++a)
                acc += (u < v ? h.edge_value(e, a, b) : h.edge_value(e, b, a)) * vterm[u][a];
            vterm[v][b] *= acc;
        }
        done[u] = 1;
        degree[u] = 0;
        if (--degree[v] == 1) leaves.push_back(v);
    }
    if (edges_left != 0) throw std::invalid_argument("sum_tree: graph contains a cycle");

    cplx total = h.scalar;
    for (int v = 0; v < n; ++v) {
        if (done[v]) continue;
        cplx s = 0;
        for (int a = 0; a < d; ++a) s += vterm[v][a];
        total *= s;
    }
    return total;
}

namespace detail {

struct NodeTerm {
    // vertex term: edge < 0, pos_a = local position; edge term: local
    // positions of the smaller/bigger endpoint
    int edge = -1;
    int pos_a = 0, pos_b = 0;
    const std::vector<cplx>* table = nullptr;
};

}  // namespace detail

// Lemma 5 summation: sum_{x in {0,1}^n} h(x) given a valid tree
// decomposition. Every term is tabulated into exactly one covering bag by
// Gray-code updates; contraction messages use shared-vertex projections.
inline cplx sum_treewidth(const TwoLocalFunction& h, const TreeDecomposition& td,
                          bool validate = true) {
    if (h.d != 2) throw std::invalid_argument("sum_treewidth: alphabet must be binary");
    if (validate) {
        auto check = validate_td(h.graph, td);
        if (!check.ok()) throw std::invalid_argument("sum_treewidth: invalid tree decomposition");
    }
    if (h.graph.n == 0) return h.scalar;
    RootedTd rt = root_td(td);
    const int nn = int(rt.bags.size());
    for (const auto& b : rt.bags)
        if (b.size() > 25) throw std::invalid_argument("sum_treewidth: bag too large");

    std::vector<std::vector<int>> nodes_of(h.graph.n);
    for (int i = 0; i < nn; ++i)
        for (int v : rt.bags[i]) nodes_of[v].push_back(i);
    auto local_pos = [&](int node, int v) {
        const auto& b = rt.bags[node];
        return int(std::lower_bound(b.begin(), b.end(), v) - b.begin());
    };

    // assign each term to one covering node
    std::vector<std::vector<detail::NodeTerm>> terms(nn);
    for (int v = 0; v < h.graph.n; ++v) {
        int node = nodes_of[v].front();
        terms[node].push_back({-1, local_pos(node, v), 0, &h.vertex_terms[v]});
    }
    for (size_t e = 0; e < h.graph.edges.size(); ++e) {
        auto [u, v] = h.graph.edges[e];
        int node = -1;
        for (int i : nodes_of[u])
            if (std::binary_search(rt.bags[i].begin(), rt.bags[i].end(), v)) { node = i; break; }
        if (node < 0) throw std::invalid_argument("sum_treewidth: term with no covering bag");
        terms[node].push_back({int(e), local_pos(node, u), local_pos(node, v), &h.edge_terms[e]});
    }

    // tabulate Q_i by Gray-code incremental update (zero factors counted
    // separately so zero-valued terms are exact)
    std::vector<std::vector<cplx>> table(nn);
    for (int i = 0; i < nn; ++i) {
        const int b = int(rt.bags[i].size());
        const size_t dim = size_t(1) << b;
        table[i].assign(dim, cplx(0));
        std::vector<std::vector<int>> touching(b);
        for (size_t t = 0; t < terms[i].size(); ++t) {
            touching[terms[i][t].pos_a].push_back(int(t));
            if (terms[i][t].edge >= 0) touching[terms[i][t].pos_b].push_back(int(t));
        }
        auto value_at = [&](const detail::NodeTerm& t, uint64_t cfg) {
            int a = int((cfg >> t.pos_a) & 1);
            if (t.edge < 0) return (*t.table)[a];
            int bb = int((cfg >> t.pos_b) & 1);
            return (*t.table)[size_t(a) * 2 + bb];
        };
        std::vector<cplx> cur(terms[i].size());
        cplx prod = 1;
        int zeros = 0;
        for (size_t t = 0; t < terms[i].size(); ++t) {
            cur[t] = value_at(terms[i][t], 0);
            if (cur[t] == cplx(0)) ++zeros;
            else prod *= cur[t];
        }
        table[i][0] = zeros ? cplx(0) : prod;
        uint64_t cfg = 0;
        for (uint64_t step = 1; step < dim; ++step) {
            int pos = __builtin_ctzll(step);
            cfg ^= uint64_t(1) << pos;
            for (int t : touching[pos]) {
                cplx nv = value_at(terms[i][t], cfg);
                if (cur[t] == cplx(0)) --zeros;
                else prod /= cur[t];
                if (nv == cplx(0)) ++zeros;
                else prod *= nv;
                cur[t] = nv;
            }
            table[i][cfg] = zeros ? cplx(0) : prod;
        }
    }

    // contract children into parents over shared-vertex projections
    for (int i : rt.postorder) {
        for (int c : rt.children[i]) {
            const auto& bc = rt.bags[c];
            const auto& bi = rt.bags[i];
            std::vector<int> shared;
            std::set_intersection(bc.begin(), bc.end(), bi.begin(), bi.end(),
                                  std::back_inserter(shared));
            const int s = int(shared.size());
            const size_t sdim = size_t(1) << s;
            // projection weights per local bit
            auto build_proj = [&](const std::vector<int>& bag) {
                std::vector<uint64_t> w(bag.size(), 0);
                for (int t = 0; t < s; ++t)
                    w[std::lower_bound(bag.begin(), bag.end(), shared[t]) - bag.begin()] =
                        uint64_t(1) << t;
                return w;
            };
            auto wc = build_proj(bc);
            std::vector<cplx> msg(sdim, cplx(0));
            const size_t cdim = table[c].size();
            std::vector<uint64_t> proj(cdim);
            proj[0] = 0;
            for (size_t x = 1; x < cdim; ++x)
                proj[x] = proj[x & (x - 1)] + wc[__builtin_ctzll(x)];
            for (size_t x = 0; x < cdim; ++x) msg[proj[x]] += table[c][x];
            table[c].clear();
            table[c].shrink_to_fit();

            auto wi = build_proj(bi);
            const size_t idim = table[i].size();
            std::vector<uint64_t> proj_i(idim);
            proj_i[0] = 0;
            for (size_t y = 1; y < idim; ++y)
                proj_i[y] = proj_i[y & (y - 1)] + wi[__builtin_ctzll(y)];
            for (size_t y = 0; y < idim; ++y) table[i][y] *= msg[proj_i[y]];
        }
    }

    cplx total = 0;
    for (const cplx& z : table[rt.root]) total += z;
    return h.scalar * total;
}

}  // namespace forr
