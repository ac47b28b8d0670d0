#pragma once

#include <algorithm>
#include <optional>
#include <queue>
#include <set>
#include <stdexcept>
#include <vector>

#include "forr/graph.hpp"

namespace forr {

struct TreeDecomposition {
    std::vector<std::vector<int>> bags;   // sorted vertex lists
    std::vector<std::vector<int>> links;  // tree adjacency between nodes

    int node_count() const { return int(bags.size()); }
    int width() const {
        size_t w = 0;
        for (const auto& b : bags) w = std::max(w, b.size());
        return int(w) - 1;
    }
    void add_link(int i, int j) {
        links[i].push_back(j);
        links[j].push_back(i);
    }
};

enum class TdAxiom { ok, vertex_uncovered, edge_uncovered, vertex_disconnected, not_a_tree };

struct TdValidation {
    TdAxiom kind = TdAxiom::ok;
    int witness = -1;  // vertex or edge index, depending on the axiom
    bool ok() const { return kind == TdAxiom::ok; }
};

inline TdValidation validate_td(const Graph& g, const TreeDecomposition& td) {
    const int nn = td.node_count();
    // the node graph must be a tree (or forest with explicit links forming one)
    {
        int edge_count = 0;
        for (const auto& l : td.links) edge_count += int(l.size());
        edge_count /= 2;
        std::vector<int> comp(nn, -1);
        int comps = 0;
        for (int s = 0; s < nn; ++s) {
            if (comp[s] >= 0) continue;
            comp[s] = comps;
            std::queue<int> q;
            q.push(s);
            while (!q.empty()) {
                int u = q.front();
                q.pop();
                for (int v : td.links[u])
                    if (comp[v] < 0) { comp[v] = comps; q.push(v); }
            }
            ++comps;
        }
        if (edge_count != nn - comps) return {TdAxiom::not_a_tree, -1};
    }
    std::vector<std::vector<int>> nodes_of(g.n);
    for (int i = 0; i < nn; ++i)
        for (int v : td.bags[i]) nodes_of[v].push_back(i);
    for (int v = 0; v < g.n; ++v)
        if (nodes_of[v].empty()) return {TdAxiom::vertex_uncovered, v};
    for (size_t e = 0; e < g.edges.size(); ++e) {
        auto [u, v] = g.edges[e];
        bool covered = false;
        for (int i : nodes_of[u]) {
            if (std::binary_search(td.bags[i].begin(), td.bags[i].end(), v)) { covered = true; break; }
        }
        if (!covered) return {TdAxiom::edge_uncovered, int(e)};
    }
    for (int v = 0; v < g.n; ++v) {
        std::vector<char> in(nn, 0), vis(nn, 0);
        for (int i : nodes_of[v]) in[i] = 1;
        std::queue<int> q;
        q.push(nodes_of[v][0]);
        vis[nodes_of[v][0]] = 1;
        int seen = 0;
        while (!q.empty()) {
            int u = q.front();
            q.pop();
            ++seen;
            for (int w : td.links[u])
                if (in[w] && !vis[w]) { vis[w] = 1; q.push(w); }
        }
        if (seen != int(nodes_of[v].size())) return {TdAxiom::vertex_disconnected, v};
    }
    return {TdAxiom::ok, -1};
}

// Connects a forest of nodes into a single tree by linking component
// representatives; harmless for all three axioms.
inline void connect_components(TreeDecomposition& td) {
    const int nn = td.node_count();
    if (nn == 0) return;
    std::vector<int> comp(nn, -1);
    std::vector<int> reps;
    for (int s = 0; s < nn; ++s) {
        if (comp[s] >= 0) continue;
        reps.push_back(s);
        std::queue<int> q;
        q.push(s);
        comp[s] = s;
        while (!q.empty()) {
            int u = q.front();
            q.pop();
            for (int v : td.links[u])
                if (comp[v] < 0) { comp[v] = s; q.push(v); }
        }
    }
    for (size_t i = 1; i < reps.size(); ++i) td.add_link(reps[0], reps[i]);
}

// Contracts subsumed parent/child bags and splits nodes with more than two
// children by duplicating their bag. Width and validity are preserved; the
// result has at most 2n-2 nodes and every node has degree <= 3.
inline TreeDecomposition normalize_td(const TreeDecomposition& input) {
    // union-find over merged nodes
    std::vector<int> find(input.node_count());
    for (size_t i = 0; i < find.size(); ++i) find[i] = int(i);
    auto root = [&](int x) {
        while (find[x] != x) { find[x] = find[find[x]]; x = find[x]; }
        return x;
    };
    std::vector<std::set<int>> bags;
    std::vector<std::set<int>> adj(input.node_count());
    for (const auto& b : input.bags) bags.emplace_back(b.begin(), b.end());
    for (int i = 0; i < input.node_count(); ++i)
        for (int j : input.links[i]) adj[i].insert(j);

    bool changed = true;
    while (changed) {
        changed = false;
        for (int i = 0; i < int(bags.size()) && !changed; ++i) {
            if (root(i) != i) continue;
            for (int j : adj[i]) {
                int rj = root(j);
                if (rj == i) continue;
                bool i_in_j = std::includes(bags[rj].begin(), bags[rj].end(), bags[i].begin(), bags[i].end());
                bool j_in_i = std::includes(bags[i].begin(), bags[i].end(), bags[rj].begin(), bags[rj].end());
                if (!i_in_j && !j_in_i) continue;
                int survivor = i_in_j ? rj : i;
                int absorbed = i_in_j ? i : rj;
                find[absorbed] = survivor;
                for (int w : adj[absorbed]) {
                    int rw = root(w);
                    if (rw != survivor) { adj[survivor].insert(rw); adj[rw].insert(survivor); }
                }
                changed = true;
                break;
            }
        }
    }

    // compact merged nodes
    std::vector<int> newid(input.node_count(), -1);
    TreeDecomposition out;
    for (int i = 0; i < int(bags.size()); ++i) {
        if (root(i) != i) continue;
        newid[i] = out.node_count();
        out.bags.emplace_back(bags[i].begin(), bags[i].end());
        out.links.emplace_back();
    }
    std::set<std::pair<int, int>> added;
    for (int i = 0; i < int(bags.size()); ++i) {
        if (root(i) != i) continue;
        for (int j : adj[i]) {
            int rj = root(j);
            if (rj == i) continue;
            int a = newid[i], b = newid[rj];
            if (a > b) std::swap(a, b);
            if (added.insert({a, b}).second) out.add_link(a, b);
        }
    }
    connect_components(out);

    // binarize: every node keeps at most 3 tree neighbors by duplicating bags
    bool split = true;
    while (split) {
        split = false;
        for (int i = 0; i < out.node_count(); ++i) {
            if (out.links[i].size() <= 3) continue;
            int copy = out.node_count();
            out.bags.push_back(out.bags[i]);
            out.links.emplace_back();
            // move all but two neighbors to the copy
            std::vector<int> keep(out.links[i].begin(), out.links[i].begin() + 2);
            std::vector<int> moved(out.links[i].begin() + 2, out.links[i].end());
            out.links[i] = keep;
            for (int w : moved) {
                std::replace(out.links[w].begin(), out.links[w].end(), i, copy);
                out.links[copy].push_back(w);
            }
            out.add_link(i, copy);
            split = true;
            break;
        }
    }
    return out;
}

// Rooted form used by the dynamic programs.
struct RootedTd {
    std::vector<std::vector<int>> bags;
    std::vector<int> parent;
    std::vector<std::vector<int>> children;
    std::vector<int> postorder;
    int root = 0;
};

inline RootedTd root_td(const TreeDecomposition& td, int root = 0) {
    RootedTd r;
    r.bags = td.bags;
    const int nn = td.node_count();
    r.parent.assign(nn, -1);
    r.children.assign(nn, {});
    r.root = root;
    std::vector<char> vis(nn, 0);
    std::vector<int> stack{root};
    vis[root] = 1;
    std::vector<int> order;
    while (!stack.empty()) {
        int u = stack.back();
        stack.pop_back();
        order.push_back(u);
        for (int v : td.links[u])
            if (!vis[v]) {
                vis[v] = 1;
                r.parent[v] = u;
                r.children[u].push_back(v);
                stack.push_back(v);
            }
    }
    if (int(order.size()) != nn) throw std::invalid_argument("root_td: node graph is not connected");
    r.postorder.assign(order.rbegin(), order.rend());
    return r;
}

// Appendix-style peeling of degree <= 2 vertices. Returns nullopt when the
// graph is not 2-degenerate (some step has minimum degree >= 3).
inline std::optional<TreeDecomposition> outerplanar_td(const Graph& g) {
    std::vector<std::set<int>> adj(g.n);
    for (auto [u, v] : g.edges) { adj[u].insert(v); adj[v].insert(u); }
    struct Removal { int v, u, w; };  // w = -1 for the degree-1 case
    std::vector<Removal> log;
    std::set<std::pair<int, int>> deg_queue;  // (degree, vertex), degree >= 1
    for (int v = 0; v < g.n; ++v)
        if (!adj[v].empty()) deg_queue.insert({int(adj[v].size()), v});

    auto requeue = [&](int v, int old_deg) {
        deg_queue.erase({old_deg, v});
        if (!adj[v].empty()) deg_queue.insert({int(adj[v].size()), v});
    };

    while (!deg_queue.empty()) {
        auto [deg, v] = *deg_queue.begin();
        if (deg >= 3) return std::nullopt;
        deg_queue.erase(deg_queue.begin());
        if (deg == 1) {
            int u = *adj[v].begin();
            int du = int(adj[u].size());
            adj[u].erase(v);
            adj[v].clear();
            requeue(u, du);
            log.push_back({v, u, -1});
        } else {
            auto it = adj[v].begin();
            int u = *it++;
            int w = *it;
            int du = int(adj[u].size()), dw = int(adj[w].size());
            adj[u].erase(v);
            adj[w].erase(v);
            adj[v].clear();
            // fill edge {u,w}, skipped when already present
            adj[u].insert(w);
            adj[w].insert(u);
            requeue(u, du);
            requeue(w, dw);
            log.push_back({v, u, w});
        }
    }

    // base case: all surviving degrees are zero; replay removals in reverse
    TreeDecomposition td;
    std::vector<char> removed(g.n, 0);
    for (const auto& rm : log) removed[rm.v] = 1;
    std::vector<std::vector<int>> nodes_of(g.n);
    for (int v = 0; v < g.n; ++v) {
        if (removed[v]) continue;
        nodes_of[v].push_back(td.node_count());
        td.bags.push_back({v});
        td.links.emplace_back();
    }
    for (auto it = log.rbegin(); it != log.rend(); ++it) {
        int attach = -1;
        std::vector<int> bag;
        if (it->w < 0) {
            attach = nodes_of[it->u].front();
            bag = {it->u, it->v};
        } else {
            for (int i : nodes_of[it->u])
                if (std::binary_search(td.bags[i].begin(), td.bags[i].end(), it->w)) { attach = i; break; }
            if (attach < 0) throw std::logic_error("outerplanar_td: replay failed to find {u,w} bag");
            bag = {it->u, it->v, it->w};
        }
        std::sort(bag.begin(), bag.end());
        int id = td.node_count();
        td.bags.push_back(bag);
        td.links.emplace_back();
        td.add_link(attach, id);
        for (int x : bag) nodes_of[x].push_back(id);
    }
    connect_components(td);
    return td;
}

// Min-fill elimination heuristic; valid for any graph, width unbounded.
inline TreeDecomposition minfill_td(const Graph& g) {
    std::vector<std::set<int>> adj(g.n);
    for (auto [u, v] : g.edges) { adj[u].insert(v); adj[v].insert(u); }
    std::vector<char> gone(g.n, 0);
    std::vector<std::vector<int>> elim_bag(g.n);
    std::vector<int> order;
    for (int step = 0; step < g.n; ++step) {
        int best = -1;
        long best_fill = -1;
        for (int v = 0; v < g.n; ++v) {
            if (gone[v]) continue;
            long fill = 0;
            for (auto i = adj[v].begin(); i != adj[v].end(); ++i)
                for (auto j = std::next(i); j != adj[v].end(); ++j)
                    if (!adj[*i].count(*j)) ++fill;
            if (best < 0 || fill < best_fill ||
                (fill == best_fill && adj[v].size() < adj[best].size())) {
                best = v;
                best_fill = fill;
            }
        }
        int v = best;
        elim_bag[v].assign(adj[v].begin(), adj[v].end());
        elim_bag[v].push_back(v);
        std::sort(elim_bag[v].begin(), elim_bag[v].end());
        for (auto i = adj[v].begin(); i != adj[v].end(); ++i)
            for (auto j = std::next(i); j != adj[v].end(); ++j) {
                adj[*i].insert(*j);
                adj[*j].insert(*i);
            }
        for (int u : adj[v]) adj[u].erase(v);
        adj[v].clear();
        gone[v] = 1;
        order.push_back(v);
    }
    TreeDecomposition td;
    std::vector<int> node_of(g.n, -1);
    std::vector<int> position(g.n, 0);
    for (int i = 0; i < g.n; ++i) position[order[i]] = i;
    for (int i = 0; i < g.n; ++i) {
        node_of[order[i]] = i;
        td.bags.push_back(elim_bag[order[i]]);
        td.links.emplace_back();
    }
    for (int i = 0; i < g.n; ++i) {
        int v = order[i];
        // attach to the earliest-eliminated later vertex in the bag
        int attach = -1, attach_pos = g.n;
        for (int u : elim_bag[v]) {
            if (u == v) continue;
            if (position[u] > i && position[u] < attach_pos) { attach_pos = position[u]; attach = u; }
        }
        if (attach >= 0) td.add_link(node_of[v], node_of[attach]);
    }
    connect_components(td);
    return td;
}

struct VertexPartition {
    std::vector<int> a, b;
    std::vector<uint8_t> side;  // 0 = A, 1 = B
};

namespace detail {

// face-on-left traversal: the edge after (u -> v) is (v -> w) with w the
// rotation predecessor of u at v
inline std::vector<int> face_walk(const std::vector<std::vector<int>>& rot, int u0, int v0,
                                  int step_budget) {
    std::vector<int> verts;
    int u = u0, v = v0;
    for (int step = 0; step < step_budget; ++step) {
        verts.push_back(v);
        const auto& rv = rot[v];
        auto it = std::find(rv.begin(), rv.end(), u);
        if (it == rv.end()) return {};
        int w = (it == rv.begin()) ? rv.back() : *(it - 1);
        u = v;
        v = w;
        if (u == u0 && v == v0) return verts;
    }
    return {};
}

}  // namespace detail

// Alternating outer-layer peel of an embedded planar graph. Layer 0 comes
// from the supplied outer face; deeper layers are found by walking the face
// that absorbed the previous layer (tracked through corners left by the
// deletions). Returns nullopt when no embedding is present or the walk turns
// inconsistent.
inline std::optional<VertexPartition> peel_partition(const Graph& g) {
    if (!g.rotation || !g.outer_face)
        return std::nullopt;  // caller should use partition_heuristic
    std::vector<std::vector<int>> rot = *g.rotation;
    std::vector<char> alive(g.n, 1);
    std::vector<int> layer_of(g.n, -1);
    int alive_count = g.n;

    // layer 0: the supplied outer face plus initially isolated vertices
    std::vector<int> layer = *g.outer_face;
    for (int v = 0; v < g.n; ++v)
        if (rot[v].empty()) layer.push_back(v);
    std::sort(layer.begin(), layer.end());
    layer.erase(std::unique(layer.begin(), layer.end()), layer.end());

    int layer_idx = 0;
    const int budget = 4 * int(g.edges.size()) + 2 * g.n + 8;

    while (alive_count > 0) {
        if (layer.empty()) return std::nullopt;  // stalled; embedding unusable
        for (int v : layer) {
            if (v < 0 || v >= g.n || !alive[v]) return std::nullopt;
            alive[v] = 0;
            layer_of[v] = layer_idx;
            --alive_count;
        }

        // corners: for each kept vertex scan its old rotation for runs of
        // vertices deleted this round; the run's bounding kept neighbors
        // (a before, b after, counterclockwise) leave the new outer face
        // passing through (b -> v -> a)
        std::vector<std::pair<int, int>> corners;  // directed edge (b -> v)
        auto deleted_now = [&](int w) { return layer_of[w] == layer_idx; };
        for (int v = 0; v < g.n; ++v) {
            if (!alive[v]) continue;
            const auto& rv = rot[v];
            int m = int(rv.size());
            for (int i = 0; i < m; ++i) {
                if (!deleted_now(rv[i])) continue;
                int prev = rv[(i - 1 + m) % m];
                if (deleted_now(prev)) continue;  // take run starts only
                int j = i;
                while (deleted_now(rv[(j + 1) % m])) j = (j + 1) % m;
                int b = rv[(j + 1) % m];
                if (!deleted_now(b)) corners.push_back({b, v});
            }
        }

        // drop deleted vertices from rotations
        for (int v = 0; v < g.n; ++v) {
            if (!alive[v]) { rot[v].clear(); continue; }
            auto& rv = rot[v];
            rv.erase(std::remove_if(rv.begin(), rv.end(),
                                    [&](int w) { return !alive[w]; }),
                     rv.end());
        }

        // next layer: union of corner face walks plus newly isolated vertices
        std::vector<int> next_layer;
        for (auto [b, v] : corners) {
            auto verts = detail::face_walk(rot, b, v, budget);
            if (verts.empty()) return std::nullopt;
            next_layer.insert(next_layer.end(), verts.begin(), verts.end());
            next_layer.push_back(b);
        }
        for (int v = 0; v < g.n; ++v)
            if (alive[v] && rot[v].empty()) next_layer.push_back(v);
        std::sort(next_layer.begin(), next_layer.end());
        next_layer.erase(std::unique(next_layer.begin(), next_layer.end()), next_layer.end());
        layer = std::move(next_layer);
        ++layer_idx;
    }

    VertexPartition part;
    part.side.assign(g.n, 0);
    for (int v = 0; v < g.n; ++v) {
        part.side[v] = layer_of[v] % 2;
        (part.side[v] ? part.b : part.a).push_back(v);
    }
    return part;
}

// Greedy 2-coloring that discourages within-class edges, improved by local
// moves.
inline VertexPartition bipartition_greedy(const Graph& g) {
    auto adj = g.adjacency();
    std::vector<int> by_degree(g.n);
    for (int v = 0; v < g.n; ++v) by_degree[v] = v;
    std::stable_sort(by_degree.begin(), by_degree.end(),
                     [&](int x, int y) { return adj[x].size() > adj[y].size(); });
    std::vector<int> side(g.n, -1);
    for (int v : by_degree) {
        int in_a = 0, in_b = 0;
        for (int u : adj[v]) {
            if (side[u] == 0) ++in_a;
            if (side[u] == 1) ++in_b;
        }
        side[v] = in_a <= in_b ? 0 : 1;
    }
    for (int pass = 0; pass < 4; ++pass) {
        bool moved = false;
        for (int v = 0; v < g.n; ++v) {
            int same = 0, other = 0;
            for (int u : adj[v]) (side[u] == side[v] ? same : other)++;
            if (same > other) { side[v] ^= 1; moved = true; }
        }
        if (!moved) break;
    }
    VertexPartition part;
    part.side.assign(g.n, 0);
    for (int v = 0; v < g.n; ++v) {
        part.side[v] = uint8_t(side[v]);
        (side[v] ? part.b : part.a).push_back(v);
    }
    return part;
}

// Partition plus per-half decompositions, in local ids of the halves.
struct PartitionPlan {
    VertexPartition part;
    Graph sub_a, sub_b;
    std::vector<int> local_a, local_b;  // old -> local (-1 when absent)
    TreeDecomposition td_a, td_b;
    bool used_peel = false;
    int width = 0;
};

namespace detail {
inline TreeDecomposition half_td(const Graph& sub) {
    if (sub.n == 0) return {};
    if (auto td = outerplanar_td(sub)) return *td;
    return minfill_td(sub);
}
}  // namespace detail

inline PartitionPlan make_plan(const Graph& g, const VertexPartition& part, bool used_peel) {
    PartitionPlan plan;
    plan.part = part;
    plan.used_peel = used_peel;
    auto [sa, la] = g.induced(part.a);
    auto [sb, lb] = g.induced(part.b);
    plan.sub_a = std::move(sa);
    plan.sub_b = std::move(sb);
    plan.local_a = std::move(la);
    plan.local_b = std::move(lb);
    plan.td_a = detail::half_td(plan.sub_a);
    plan.td_b = detail::half_td(plan.sub_b);
    plan.width = std::max(plan.sub_a.n ? plan.td_a.width() : 0,
                          plan.sub_b.n ? plan.td_b.width() : 0);
    return plan;
}

inline PartitionPlan partition_heuristic(const Graph& g) {
    auto plan = make_plan(g, bipartition_greedy(g), false);
    if (g.n && !plan.part.a.empty() && !validate_td(plan.sub_a, plan.td_a).ok())
        throw std::logic_error("partition_heuristic: invalid decomposition for half A");
    if (g.n && !plan.part.b.empty() && !validate_td(plan.sub_b, plan.td_b).ok())
        throw std::logic_error("partition_heuristic: invalid decomposition for half B");
    return plan;
}

// Peel when an embedding is available and the halves come out 2-degenerate;
// the greedy/min-fill fallback otherwise.
inline PartitionPlan plan_partition(const Graph& g) {
    if (auto part = peel_partition(g)) {
        auto [sa, la] = g.induced(part->a);
        auto [sb, lb] = g.induced(part->b);
        auto ta = outerplanar_td(sa);
        auto tb = outerplanar_td(sb);
        if (ta && tb && validate_td(sa, *ta).ok() && validate_td(sb, *tb).ok()) {
            PartitionPlan plan;
            plan.part = *part;
            plan.used_peel = true;
            plan.sub_a = std::move(sa);
            plan.sub_b = std::move(sb);
            plan.local_a = std::move(la);
            plan.local_b = std::move(lb);
            plan.td_a = std::move(*ta);
            plan.td_b = std::move(*tb);
            plan.width = std::max(plan.sub_a.n ? plan.td_a.width() : 0,
                                  plan.sub_b.n ? plan.td_b.width() : 0);
            return plan;
        }
    }
    return partition_heuristic(g);
}

}  // namespace forr
