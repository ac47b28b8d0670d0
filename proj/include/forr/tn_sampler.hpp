#pragma once

#include <cmath>
#include <optional>
#include <stdexcept>
#include <vector>

#include "forr/graph.hpp"
#include "forr/rng.hpp"
#include "forr/tensor.hpp"
#include "forr/tree_decomposition.hpp"

namespace forr {

// Diagonal multi-qudit gate: diag holds d^{|support|} entries, support[0]
// fastest-varying. An empty support is a scalar factor.
struct DiagonalGate {
    std::vector<int> support;  // sorted qudit ids
    std::vector<cplx> diag;
};

struct QuditSystem {
    int n = 0;
    int d = 2;
    std::vector<std::vector<cplx>> chi;  // d x d density matrices, row-major
    std::vector<std::vector<cplx>> ops;  // d x d single-qudit operators
    std::vector<DiagonalGate> gates;

    static QuditSystem make(int n, int d) {
        QuditSystem s;
        s.n = n;
        s.d = d;
        std::vector<cplx> id(size_t(d) * d, cplx(0));
        std::vector<cplx> mixed(size_t(d) * d, cplx(0));
        for (int i = 0; i < d; ++i) {
            id[size_t(i) * d + i] = 1;
            mixed[size_t(i) * d + i] = 1.0 / d;
        }
        s.chi.assign(n, mixed);
        s.ops.assign(n, id);
        return s;
    }

    bool op_is_identity(int a, double tol = 1e-12) const {
        for (int i = 0; i < d; ++i)
            for (int j = 0; j < d; ++j)
                if (std::abs(ops[a][size_t(i) * d + j] - cplx(i == j ? 1 : 0)) > tol) return false;
        return true;
    }

    // edge for every pair of qudits sharing a gate
    Graph connectivity() const {
        Graph g(n);
        for (const auto& gate : gates)
            for (size_t i = 0; i < gate.support.size(); ++i)
                for (size_t j = i + 1; j < gate.support.size(); ++j)
                    g.add_edge(gate.support[i], gate.support[j]);
        return g;
    }
};

// vec(chi): index k*d+b holds chi(k,b)
inline std::vector<cplx> vec_of(const std::vector<cplx>& mat) { return mat; }

// merge coefficients: entrywise inverse of vec(chi) on its support
inline std::vector<cplx> merge_coeffs(const std::vector<cplx>& chi_vec) {
    std::vector<cplx> c(chi_vec.size());
    for (size_t i = 0; i < chi_vec.size(); ++i)
        c[i] = chi_vec[i] == cplx(0) ? cplx(0) : cplx(1) / chi_vec[i];
    return c;
}

// M_b applied to two wire values: c o u o v (Prop. 1 property 3)
inline std::vector<cplx> merge_apply(const std::vector<cplx>& chi_vec,
                                     const std::vector<cplx>& u, const std::vector<cplx>& v) {
    auto c = merge_coeffs(chi_vec);
    std::vector<cplx> out(c.size());
    for (size_t i = 0; i < c.size(); ++i) out[i] = c[i] * u[i] * v[i];
    return out;
}

struct StagedNode {
    std::vector<int> bag;  // sorted
    int parent = -1;
    std::vector<int> children;
    std::vector<int> introduced;     // qudits appearing in no child
    std::vector<int> merged;         // qudits passed up by both children
    std::vector<int> measured;       // bag \ parent bag
    std::vector<int> gate_ids;       // gates owned by this node
    std::vector<int> gate_support;   // sorted union of owned supports
    std::vector<cplx> gate_diag;     // combined diagonal over gate_support
    cplx gate_scalar{1.0, 0.0};      // support-free gates
};

struct StagedNodeNetwork {
    const QuditSystem* sys = nullptr;
    std::vector<StagedNode> nodes;
    std::vector<int> postorder;  // children before parents
    int root = 0;
};

inline void refresh_gate_diagonals(StagedNodeNetwork& net);

// Builds the staged network from a tree decomposition of the connectivity
// graph: gates are owned by the unique highest node containing their support,
// qudits are introduced once and measured where they leave the tree.
inline StagedNodeNetwork build_network(const QuditSystem& sys, const TreeDecomposition& td_in) {
    {
        auto v = validate_td(sys.connectivity(), td_in);
        if (!v.ok()) throw std::invalid_argument("build_network: decomposition invalid for connectivity graph");
    }
    TreeDecomposition td = normalize_td(td_in);
    int root = 0;
    for (int i = 0; i < td.node_count(); ++i)
        if (td.links[i].size() <= 1) { root = i; break; }
    RootedTd rt = root_td(td, root);

    StagedNodeNetwork net;
    net.sys = &sys;
    net.root = rt.root;
    net.postorder = rt.postorder;
    net.nodes.resize(rt.bags.size());
    for (size_t i = 0; i < rt.bags.size(); ++i) {
        auto& node = net.nodes[i];
        node.bag = rt.bags[i];
        node.parent = rt.parent[i];
        node.children = rt.children[i];
        if (node.children.size() > 2)
            throw std::logic_error("build_network: normalization left a node with >2 children");
        std::vector<char> in_child(sys.n, 0);
        std::vector<int> child_count(sys.n, 0);
        for (int c : node.children)
            for (int v : rt.bags[c])
                if (std::binary_search(node.bag.begin(), node.bag.end(), v)) ++child_count[v];
        for (int v : node.bag) {
            if (child_count[v] == 0) node.introduced.push_back(v);
            if (child_count[v] == 2) node.merged.push_back(v);
        }
        if (node.parent < 0) {
            node.measured = node.bag;
        } else {
            const auto& pb = rt.bags[node.parent];
            for (int v : node.bag)
                if (!std::binary_search(pb.begin(), pb.end(), v)) node.measured.push_back(v);
        }
    }

    // gate ownership: support within the bag, touching a leaving qudit
    std::vector<int> owner(sys.gates.size(), -1);
    for (size_t gid = 0; gid < sys.gates.size(); ++gid) {
        const auto& sup = sys.gates[gid].support;
        for (size_t i = 0; i < net.nodes.size(); ++i) {
            const auto& node = net.nodes[i];
            bool inside = std::includes(node.bag.begin(), node.bag.end(), sup.begin(), sup.end());
            if (!inside) continue;
            bool touches = sup.empty() && node.parent < 0;  // scalar gates go to the root
            for (int v : sup)
                touches |= std::binary_search(node.measured.begin(), node.measured.end(), v);
            if (!touches) continue;
            if (owner[gid] >= 0) throw std::logic_error("build_network: gate owned twice");
            owner[gid] = int(i);
        }
        if (owner[gid] < 0) throw std::invalid_argument("build_network: gate support not covered by any bag");
        net.nodes[owner[gid]].gate_ids.push_back(int(gid));
    }

    for (auto& node : net.nodes)
        for (int gid : node.gate_ids) {
            const auto& sup = sys.gates[gid].support;
            std::vector<int> u;
            std::set_union(node.gate_support.begin(), node.gate_support.end(),
                           sup.begin(), sup.end(), std::back_inserter(u));
            node.gate_support = std::move(u);
        }
    refresh_gate_diagonals(net);
    return net;
}

// Recombines per-node gate diagonals from the system's current gate values.
// Valid whenever the gate structure (supports, counts) is unchanged, e.g.
// after easy-qudit outcomes restricted the diagonals.
inline void refresh_gate_diagonals(StagedNodeNetwork& net) {
    const auto& sys = *net.sys;
    for (auto& node : net.nodes) {
        size_t dim = 1;
        for (size_t i = 0; i < node.gate_support.size(); ++i) dim *= sys.d;
        node.gate_diag.assign(dim, cplx(1));
        node.gate_scalar = cplx(1);
        for (int gid : node.gate_ids) {
            const auto& gate = sys.gates[gid];
            if (gate.support.empty()) {
                node.gate_scalar *= gate.diag[0];
                continue;
            }
            std::vector<size_t> pos(gate.support.size());
            for (size_t k = 0; k < gate.support.size(); ++k) {
                auto it = std::lower_bound(node.gate_support.begin(), node.gate_support.end(),
                                           gate.support[k]);
                pos[k] = size_t(it - node.gate_support.begin());
            }
            for (size_t idx = 0; idx < dim; ++idx) {
                size_t gidx = 0, mul = 1;
                for (size_t k = 0; k < gate.support.size(); ++k) {
                    size_t digit = idx;
                    for (size_t p = 0; p < pos[k]; ++p) digit /= sys.d;
                    gidx += (digit % sys.d) * mul;
                    mul *= sys.d;
                }
                node.gate_diag[idx] *= gate.diag[gidx];
            }
        }
    }
}

namespace detail {

// doubled diagonal: entry multiplier U(kets) * conj(U(bras))
inline void scale_gate_doubled(LabeledTensor& t, const StagedNode& node, int d) {
    if (node.gate_scalar != cplx(1))
        for (auto& z : t.data) z *= node.gate_scalar * std::conj(node.gate_scalar);
    if (node.gate_support.empty()) return;
    const auto& sup = node.gate_support;
    std::vector<size_t> strides(sup.size());
    for (size_t k = 0; k < sup.size(); ++k) strides[k] = t.stride(t.leg_pos(sup[k]));
    for (size_t i = 0; i < t.data.size(); ++i) {
        size_t ik = 0, ib = 0, mul = 1;
        for (size_t k = 0; k < sup.size(); ++k) {
            int wire = int((i / strides[k]) % t.dim);
            ik += size_t(wire / d) * mul;
            ib += size_t(wire % d) * mul;
            mul *= d;
        }
        t.data[i] *= node.gate_diag[ik] * std::conj(node.gate_diag[ib]);
    }
}

inline void scale_gate_single(LabeledTensor& t, const StagedNode& node) {
    if (node.gate_scalar != cplx(1))
        for (auto& z : t.data) z *= node.gate_scalar;
    if (!node.gate_support.empty()) scale_legs(t, node.gate_support, node.gate_diag);
}

// (O (x) conj(O)) as a d^2 x d^2 matrix on a doubled wire
inline std::vector<cplx> doubled_op(const std::vector<cplx>& o, int d) {
    std::vector<cplx> m(size_t(d) * d * d * d);
    for (int k1 = 0; k1 < d; ++k1)
        for (int b1 = 0; b1 < d; ++b1)
            for (int k2 = 0; k2 < d; ++k2)
                for (int b2 = 0; b2 < d; ++b2)
                    m[size_t(k1 * d + b1) * d * d + (k2 * d + b2)] =
                        o[size_t(k1) * d + k2] * std::conj(o[size_t(b1) * d + b2]);
    return m;
}

// row (x,x) of (O (x) conj(O)): covector absorbing the operator and the
// projection onto outcome x
inline std::vector<cplx> outcome_covec(const std::vector<cplx>& o, int d, int x) {
    std::vector<cplx> v(size_t(d) * d);
    for (int k = 0; k < d; ++k)
        for (int b = 0; b < d; ++b) v[size_t(k) * d + b] = o[size_t(x) * d + k] * std::conj(o[size_t(x) * d + b]);
    return v;
}

inline std::vector<cplx> trace_vec(int d) {
    std::vector<cplx> v(size_t(d) * d, cplx(0));
    for (int i = 0; i < d; ++i) v[size_t(i) * d + i] = 1;
    return v;
}

// children tensors (legs within the bag) -> merged + introduced + gates
inline LabeledTensor assemble(const StagedNodeNetwork& net, int ni,
                              std::vector<LabeledTensor> kids) {
    const auto& node = net.nodes[ni];
    const int d = net.sys->d;
    LabeledTensor t = LabeledTensor::scalar(d * d);
    bool first = true;
    for (auto& kid : kids) {
        if (first) {
            t = std::move(kid);
            first = false;
            continue;
        }
        // merge coefficients on wires feeding both children
        for (int b : node.merged) {
            std::vector<cplx> c = merge_coeffs(net.sys->chi[b]);
            scale_leg(t, b, c);
        }
        t = gcontract(t, kid, {});
    }
    for (int b : node.introduced) t = gcontract(t, LabeledTensor::wire(b, d * d, net.sys->chi[b]), {});
    scale_gate_doubled(t, node, d);
    return t;
}

inline LabeledTensor trace_to_bag(const StagedNodeNetwork& net, const LabeledTensor& t,
                                  const std::vector<int>& bag) {
    LabeledTensor out = t;
    const int d = net.sys->d;
    auto tv = trace_vec(d);
    for (int q : t.quds)
        if (!std::binary_search(bag.begin(), bag.end(), q)) out = contract_leg(out, q, tv);
    return out;
}

}  // namespace detail

struct SampleResult {
    bool valid = false;
    std::vector<int> outcome;           // per qudit
    std::vector<double> conditionals;   // per-node conditional probabilities
    double norm = 0;                    // unnormalized total mass at the root
};

// Samples x ~ P(x) propto <x| O U chi U^dag O^dag |x>. Bottom-up rho pass,
// top-down Pi/sigma pass with per-node outcome sampling.
inline SampleResult tn_sample(const StagedNodeNetwork& net, RngStream& rng) {
    const auto& sys = *net.sys;
    const int d = sys.d;
    const int nn = int(net.nodes.size());
    SampleResult res;
    res.outcome.assign(sys.n, -1);

    // bottom-up rho pass
    std::vector<LabeledTensor> rho(nn);
    for (int i : net.postorder) {
        const auto& node = net.nodes[i];
        std::vector<LabeledTensor> kids;
        for (int c : node.children) kids.push_back(detail::trace_to_bag(net, rho[c], node.bag));
        LabeledTensor t = detail::assemble(net, i, std::move(kids));
        for (int b : node.measured) apply_matrix_leg(t, b, detail::doubled_op(sys.ops[b], d));
        rho[i] = std::move(t);
    }

    // top-down sampling pass
    std::vector<LabeledTensor> sigma(nn);
    struct Frame { int node; LabeledTensor pi; };
    std::vector<LabeledTensor> pi(nn);
    pi[net.root] = LabeledTensor::scalar(d * d);
    bool zero_distribution = false;

    // explicit recursion
    std::vector<int> stack{net.root};
    std::vector<int> phase(nn, 0);
    while (!stack.empty() && !zero_distribution) {
        int i = stack.back();
        const auto& node = net.nodes[i];
        if (phase[i] == 0) {
            // sample outcomes for measured qudits
            std::vector<int> shared;
            for (int q : rho[i].quds)
                if (pi[i].leg_pos(q) >= 0) shared.push_back(q);
            LabeledTensor w = gcontract(rho[i], pi[i], shared);
            // w now has exactly the measured legs
            size_t mdim = 1;
            for (size_t k = 0; k < node.measured.size(); ++k) mdim *= d;
            std::vector<double> mass(mdim);
            double total = 0, maxmass = 0;
            for (size_t idx = 0; idx < mdim; ++idx) {
                // diagonal wire digits x*d+x
                size_t widx = 0, mul = 1, rem = idx;
                for (size_t k = 0; k < node.measured.size(); ++k) {
                    int x = int(rem % d);
                    rem /= d;
                    widx += size_t(x * d + x) * mul;
                    mul *= size_t(d) * d;
                }
                mass[idx] = w.data[widx].real();
                maxmass = std::max(maxmass, std::abs(mass[idx]));
                total += mass[idx];
            }
            for (auto& m : mass) {
                if (m < -1e-9 * std::max(1.0, maxmass))
                    throw std::runtime_error("tn_sample: negative probability beyond tolerance");
                m = std::max(m, 0.0);
            }
            if (total <= 1e-300) {
                if (i == net.root) { zero_distribution = true; break; }
                throw std::runtime_error("tn_sample: sampled prefix has zero mass");
            }
            if (i == net.root) res.norm = total;
            double u = rng.real() * total;
            size_t chosen = mdim - 1;
            double acc = 0;
            for (size_t idx = 0; idx < mdim; ++idx) {
                acc += mass[idx];
                if (u < acc) { chosen = idx; break; }
            }
            res.conditionals.push_back(mass[chosen] / total);
            size_t rem = chosen;
            for (int b : node.measured) {
                res.outcome[b] = int(rem % d);
                rem /= d;
            }
            phase[i] = 1;
        }
        int nc = int(node.children.size());
        if (phase[i] <= nc) {
            int which = phase[i] - 1;
            if (which < nc) {
                // build Pi for child `which`
                int c = node.children[which];
                LabeledTensor x = pi[i];
                for (size_t k = 0; k < node.measured.size(); ++k) {
                    int b = node.measured[k];
                    x = gcontract(x, LabeledTensor::wire(b, d * d,
                                                         detail::outcome_covec(sys.ops[b], d, res.outcome[b])),
                                  {});
                }
                detail::scale_gate_doubled(x, node, d);
                for (int b : node.introduced)
                    x = contract_leg(x, b, sys.chi[b]);
                for (int b : node.merged) scale_leg(x, b, merge_coeffs(sys.chi[b]));
                if (nc == 2) {
                    int sib = node.children[which ^ 1];
                    LabeledTensor sib_t = (which == 0)
                                              ? detail::trace_to_bag(net, rho[sib], node.bag)
                                              : sigma[sib];
                    const auto& cb = net.nodes[c].bag;
                    std::vector<int> sum_legs;
                    for (int q : sib_t.quds)
                        if (!std::binary_search(cb.begin(), cb.end(), q)) sum_legs.push_back(q);
                    x = gcontract(x, sib_t, sum_legs);
                }
                pi[c] = std::move(x);
                ++phase[i];
                stack.push_back(c);
                continue;
            }
            ++phase[i];
        }
        // integrate children results into sigma
        std::vector<LabeledTensor> kids;
        for (int c : node.children) kids.push_back(sigma[c]);
        LabeledTensor t = detail::assemble(net, i, std::move(kids));
        for (int b : node.measured)
            t = contract_leg(t, b, detail::outcome_covec(sys.ops[b], d, res.outcome[b]));
        sigma[i] = std::move(t);
        stack.pop_back();
    }

    if (zero_distribution) {
        res.valid = false;  // no valid outputs
        return res;
    }
    res.valid = true;
    return res;
}

inline SampleResult tn_sample(const QuditSystem& sys, const TreeDecomposition& td, RngStream& rng) {
    auto net = build_network(sys, td);
    return tn_sample(net, rng);
}

// test oracle: contract the staged network keeping every leg open; the
// result must equal vec(O U chi U^dag O^dag)
inline LabeledTensor contract_full(const StagedNodeNetwork& net) {
    const auto& sys = *net.sys;
    const int d = sys.d;
    std::vector<LabeledTensor> acc(net.nodes.size());
    for (int i : net.postorder) {
        const auto& node = net.nodes[i];
        std::vector<LabeledTensor> kids;
        for (int c : node.children) kids.push_back(acc[c]);  // keep all legs
        // merge/introduce/gates but only on wires in this bag
        LabeledTensor t = LabeledTensor::scalar(d * d);
        bool first = true;
        for (auto& kid : kids) {
            if (first) { t = std::move(kid); first = false; continue; }
            for (int b : node.merged) scale_leg(t, b, merge_coeffs(sys.chi[b]));
            t = gcontract(t, kid, {});
        }
        for (int b : node.introduced) t = gcontract(t, LabeledTensor::wire(b, d * d, sys.chi[b]), {});
        detail::scale_gate_doubled(t, node, d);
        for (int b : node.measured) apply_matrix_leg(t, b, detail::doubled_op(sys.ops[b], d));
        acc[i] = std::move(t);
    }
    return acc[net.root];
}

// restriction of a gate diagonal to fixed digits (-1 = kept)
inline DiagonalGate restrict_gate(const DiagonalGate& gate, const std::vector<int>& outcomes,
                                  const std::vector<int>& new_of_old, int d) {
    DiagonalGate g;
    std::vector<int> kept_pos;
    for (size_t k = 0; k < gate.support.size(); ++k)
        if (outcomes[gate.support[k]] < 0) {
            kept_pos.push_back(int(k));
            g.support.push_back(new_of_old[gate.support[k]]);
        }
    size_t dim = 1;
    for (size_t i = 0; i < g.support.size(); ++i) dim *= d;
    g.diag.assign(dim, cplx(0));
    for (size_t idx = 0; idx < dim; ++idx) {
        size_t full = 0, mul = 1, rem = idx;
        size_t kp = 0;
        for (size_t k = 0; k < gate.support.size(); ++k) {
            int digit;
            if (kp < kept_pos.size() && int(k) == kept_pos[kp]) {
                digit = int(rem % d);
                rem /= d;
                ++kp;
            } else {
                digit = outcomes[gate.support[k]];
            }
            full += size_t(digit) * mul;
            mul *= d;
        }
        g.diag[idx] = gate.diag[full];
    }
    return g;
}

struct EasyRemoval {
    std::vector<int> outcomes;     // original indexing, -1 where kept
    QuditSystem reduced;
    std::vector<int> old_of_new;
};

// Samples qudits whose operator is the identity straight from diag(chi) and
// restricts the touching gates to the sampled rows. Requires the total gate
// product to be unitary (caller-asserted).
inline EasyRemoval remove_easy(const QuditSystem& sys, RngStream& rng) {
    EasyRemoval out;
    out.outcomes.assign(sys.n, -1);
    std::vector<int> new_of_old(sys.n, -1);
    for (int a = 0; a < sys.n; ++a) {
        if (sys.op_is_identity(a)) {
            std::vector<double> p(sys.d);
            double total = 0;
            for (int x = 0; x < sys.d; ++x) {
                p[x] = std::max(0.0, sys.chi[a][size_t(x) * sys.d + x].real());
                total += p[x];
            }
            double u = rng.real() * total;
            int chosen = sys.d - 1;
            double acc = 0;
            for (int x = 0; x < sys.d; ++x) {
                acc += p[x];
                if (u < acc) { chosen = x; break; }
            }
            out.outcomes[a] = chosen;
        } else {
            new_of_old[a] = int(out.old_of_new.size());
            out.old_of_new.push_back(a);
        }
    }
    out.reduced.n = int(out.old_of_new.size());
    out.reduced.d = sys.d;
    for (int a : out.old_of_new) {
        out.reduced.chi.push_back(sys.chi[a]);
        out.reduced.ops.push_back(sys.ops[a]);
    }
    for (const auto& gate : sys.gates)
        out.reduced.gates.push_back(restrict_gate(gate, out.outcomes, new_of_old, sys.d));
    return out;
}

// <x|alpha> for a pure product input, single-wire specialization of the
// network. chi_vecs are length-d state vectors.
inline cplx amplitude_pure(const std::vector<std::vector<cplx>>& chi_vecs,
                           const std::vector<DiagonalGate>& gates,
                           const std::vector<std::vector<cplx>>& ops,
                           const std::vector<int>& x, const TreeDecomposition& td) {
    QuditSystem shell;
    shell.n = int(chi_vecs.size());
    shell.d = int(chi_vecs.empty() ? 2 : chi_vecs[0].size());
    for (const auto& v : chi_vecs) {
        if (int(v.size()) != shell.d) throw std::invalid_argument("amplitude_pure: ragged state vectors");
        std::vector<cplx> mat(size_t(shell.d) * shell.d);
        for (int i = 0; i < shell.d; ++i)
            for (int j = 0; j < shell.d; ++j) mat[size_t(i) * shell.d + j] = v[i] * std::conj(v[j]);
        shell.chi.push_back(std::move(mat));
    }
    shell.ops = ops;
    shell.gates = gates;
    StagedNodeNetwork net = build_network(shell, td);

    const int d = shell.d;
    std::vector<LabeledTensor> acc(net.nodes.size());
    for (int i : net.postorder) {
        const auto& node = net.nodes[i];
        LabeledTensor t = LabeledTensor::scalar(d);
        bool first = true;
        for (int c : node.children) {
            if (first) { t = std::move(acc[c]); first = false; continue; }
            for (int b : node.merged) {
                std::vector<cplx> coeff(d);
                for (int j = 0; j < d; ++j)
                    coeff[j] = chi_vecs[b][j] == cplx(0) ? cplx(0) : cplx(1) / chi_vecs[b][j];
                scale_leg(t, b, coeff);
            }
            t = gcontract(t, acc[c], {});
        }
        for (int b : node.introduced) t = gcontract(t, LabeledTensor::wire(b, d, chi_vecs[b]), {});
        detail::scale_gate_single(t, node);
        for (int b : node.measured) {
            std::vector<cplx> covec(d);
            for (int j = 0; j < d; ++j) covec[j] = ops[b][size_t(x[b]) * d + j];
            t = contract_leg(t, b, covec);
        }
        acc[i] = std::move(t);
    }
    return acc[net.root].data[0];
}

}  // namespace forr
