#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <utility>
#include <vector>

namespace forr {

// Simple undirected graph. The optional rotation system (per-vertex cyclic
// neighbor order, counterclockwise) and outer-face vertex list together form
// a combinatorial planar embedding.
struct Graph {
    int n = 0;
    std::vector<std::pair<int, int>> edges;  // u < v, sorted, unique
    std::optional<std::vector<std::vector<int>>> rotation;
    std::optional<std::vector<int>> outer_face;

    Graph() = default;
    explicit Graph(int nv) : n(nv) {}

    void add_edge(int u, int v) {
        if (u == v) return;
        if (u > v) std::swap(u, v);
        auto e = std::make_pair(u, v);
        auto it = std::lower_bound(edges.begin(), edges.end(), e);
        if (it == edges.end() || *it != e) edges.insert(it, e);
    }

    bool has_edge(int u, int v) const {
        if (u > v) std::swap(u, v);
        return std::binary_search(edges.begin(), edges.end(), std::make_pair(u, v));
    }

    std::vector<std::vector<int>> adjacency() const {
        std::vector<std::vector<int>> adj(n);
        for (auto [u, v] : edges) {
            adj[u].push_back(v);
            adj[v].push_back(u);
        }
        return adj;
    }

    int edge_index(int u, int v) const {
        if (u > v) std::swap(u, v);
        auto it = std::lower_bound(edges.begin(), edges.end(), std::make_pair(u, v));
        if (it == edges.end() || *it != std::make_pair(u, v)) return -1;
        return int(it - edges.begin());
    }

    // induced subgraph on `vs`; second result maps old vertex id -> local id
    // (-1 when absent)
    std::pair<Graph, std::vector<int>> induced(const std::vector<int>& vs) const {
        std::vector<int> local(n, -1);
        for (size_t i = 0; i < vs.size(); ++i) local[vs[i]] = int(i);
        Graph g(int(vs.size()));
        for (auto [u, v] : edges)
            if (local[u] >= 0 && local[v] >= 0) g.add_edge(local[u], local[v]);
        return {std::move(g), std::move(local)};
    }
};

namespace detail {

// rotation by sorting around each vertex, counterclockwise by angle
inline std::vector<std::vector<int>> rotation_from_coords(const Graph& g,
                                                          const std::vector<double>& x,
                                                          const std::vector<double>& y) {
    auto rot = g.adjacency();
    for (int v = 0; v < g.n; ++v) {
        std::sort(rot[v].begin(), rot[v].end(), [&](int a, int b) {
            return std::atan2(y[a] - y[v], x[a] - x[v]) < std::atan2(y[b] - y[v], x[b] - x[v]);
        });
    }
    return rot;
}

}  // namespace detail

// rows x cols grid lattice with embedding (x to the right, y upward; row 0 on
// top). Vertex (r,c) has id r*cols + c.
inline Graph generate_grid(int rows, int cols) {
    if (rows < 1 || cols < 1) throw std::invalid_argument("generate_grid: dimensions must be >= 1");
    Graph g(rows * cols);
    auto id = [&](int r, int c) { return r * cols + c; };
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c) {
            if (c + 1 < cols) g.add_edge(id(r, c), id(r, c + 1));
            if (r + 1 < rows) g.add_edge(id(r, c), id(r + 1, c));
        }
    std::vector<double> x(g.n), y(g.n);
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c) { x[id(r, c)] = c; y[id(r, c)] = -r; }
    g.rotation = detail::rotation_from_coords(g, x, y);

    std::vector<int> outer;
    for (int c = 0; c < cols; ++c) outer.push_back(id(0, c));
    for (int r = 1; r < rows; ++r) outer.push_back(id(r, cols - 1));
    if (rows > 1)
        for (int c = cols - 2; c >= 0; --c) outer.push_back(id(rows - 1, c));
    if (cols > 1)
        for (int r = rows - 2; r >= 1; --r) outer.push_back(id(r, 0));
    g.outer_face = std::move(outer);
    return g;
}

// Triangular patch with `rows` rows; row i holds i+1 vertices. rows=4 gives
// the 10-vertex, 18-edge lattice.
inline Graph generate_triangular(int rows) {
    if (rows < 1) throw std::invalid_argument("generate_triangular: rows must be >= 1");
    Graph g(rows * (rows + 1) / 2);
    auto id = [&](int i, int j) { return i * (i + 1) / 2 + j; };
    for (int i = 0; i < rows; ++i)
        for (int j = 0; j <= i; ++j) {
            if (j + 1 <= i) g.add_edge(id(i, j), id(i, j + 1));
            if (i + 1 < rows) {
                g.add_edge(id(i, j), id(i + 1, j));
                g.add_edge(id(i, j), id(i + 1, j + 1));
            }
        }
    std::vector<double> x(g.n), y(g.n);
    for (int i = 0; i < rows; ++i)
        for (int j = 0; j <= i; ++j) { x[id(i, j)] = j - 0.5 * i; y[id(i, j)] = -double(i); }
    g.rotation = detail::rotation_from_coords(g, x, y);

    std::vector<int> outer{id(0, 0)};
    for (int i = 1; i < rows; ++i) outer.push_back(id(i, 0));
    for (int j = 1; j < rows; ++j) outer.push_back(id(rows - 1, j));
    for (int i = rows - 2; i >= 1; --i) outer.push_back(id(i, i));
    g.outer_face = std::move(outer);
    return g;
}

struct ContractResult {
    Graph graph;
    std::vector<int> vertex_map;  // old id -> new id
};

// Contracts {keep, remove}: the merged vertex inherits `keep`'s identity,
// parallel edges collapse, self-loops drop. Rotation systems are spliced
// (remove's neighbor cycle inserted at its position in keep's cycle);
// duplicates keep the first occurrence.
inline ContractResult contract_edge(const Graph& g, int keep, int remove) {
    if (!g.has_edge(keep, remove)) throw std::invalid_argument("contract_edge: edge not present");
    std::vector<int> map(g.n);
    int next = 0;
    for (int v = 0; v < g.n; ++v) map[v] = (v == remove) ? -1 : next++;
    map[remove] = map[keep];

    ContractResult res;
    res.graph = Graph(g.n - 1);
    for (auto [u, v] : g.edges) {
        int a = map[u], b = map[v];
        if (a != b) res.graph.add_edge(a, b);
    }

    if (g.rotation) {
        const auto& rot = *g.rotation;
        std::vector<std::vector<int>> nrot(res.graph.n);
        for (int v = 0; v < g.n; ++v) {
            if (v == remove) continue;
            std::vector<int> cycle;
            if (v == keep) {
                // splice remove's cycle (rotated to start after keep) at its slot
                std::vector<int> spliced;
                const auto& rc = rot[remove];
                auto kit = std::find(rc.begin(), rc.end(), keep);
                if (kit != rc.end()) {
                    size_t start = size_t(kit - rc.begin());
                    for (size_t s = 1; s < rc.size(); ++s) {
                        int w = rc[(start + s) % rc.size()];
                        if (w != keep) spliced.push_back(w);
                    }
                }
                for (int w : rot[keep]) {
                    if (w == remove)
                        cycle.insert(cycle.end(), spliced.begin(), spliced.end());
                    else
                        cycle.push_back(w);
                }
            } else {
                cycle = rot[v];
            }
            std::vector<int> out;
            for (int w : cycle) {
                int nw = map[w];
                if (nw == map[v]) continue;
                if (std::find(out.begin(), out.end(), nw) == out.end()) out.push_back(nw);
            }
            nrot[map[v]] = std::move(out);
        }
        res.graph.rotation = std::move(nrot);
    }

    if (g.outer_face) {
        std::vector<int> outer;
        for (int v : *g.outer_face) {
            int nv = map[v];
            if (outer.empty() || outer.back() != nv) outer.push_back(nv);
        }
        while (outer.size() > 1 && outer.front() == outer.back()) outer.pop_back();
        // dedup non-adjacent repeats conservatively
        std::vector<int> seen;
        std::vector<int> dedup;
        for (int v : outer)
            if (std::find(dedup.begin(), dedup.end(), v) == dedup.end()) dedup.push_back(v);
        res.graph.outer_face = std::move(dedup);
    }

    res.vertex_map = std::move(map);
    return res;
}

}  // namespace forr
