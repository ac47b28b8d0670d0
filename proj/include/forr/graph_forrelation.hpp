#pragma once

#include <array>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <vector>

#include "forr/parallel.hpp"
#include "forr/rng.hpp"
#include "forr/tn_sampler.hpp"
#include "forr/two_local.hpp"

namespace forr {

// 2x2 complex matrix, row-major.
struct Mat2 {
    std::array<cplx, 4> m{cplx(1), cplx(0), cplx(0), cplx(1)};

    cplx operator()(int r, int c) const { return m[size_t(r) * 2 + c]; }

    static Mat2 identity() { return {}; }
    static Mat2 hadamard() {
        const double s = 1.0 / std::sqrt(2.0);
        return {{cplx(s), cplx(s), cplx(s), cplx(-s)}};
    }
    static Mat2 pauli_z() { return {{cplx(1), cplx(0), cplx(0), cplx(-1)}}; }
    // exp(-i theta X / ...): conventions follow exp(i a X) = cos a I + i sin a X
    static Mat2 exp_ix(double a) {
        return {{cplx(std::cos(a), 0), cplx(0, std::sin(a)), cplx(0, std::sin(a)), cplx(std::cos(a), 0)}};
    }
    static Mat2 exp_iz(double a) {
        return {{std::polar(1.0, a), cplx(0), cplx(0), std::polar(1.0, -a)}};
    }
    static Mat2 projector(int a, int b) {
        Mat2 p{{cplx(0), cplx(0), cplx(0), cplx(0)}};
        p.m[size_t(a) * 2 + b] = 1;
        return p;
    }

    Mat2 dagger() const { return {{std::conj(m[0]), std::conj(m[2]), std::conj(m[1]), std::conj(m[3])}}; }

    Mat2 operator*(const Mat2& o) const {
        return {{m[0] * o.m[0] + m[1] * o.m[2], m[0] * o.m[1] + m[1] * o.m[3],
                 m[2] * o.m[0] + m[3] * o.m[2], m[2] * o.m[1] + m[3] * o.m[3]}};
    }

    Mat2 scaled(cplx s) const { return {{s * m[0], s * m[1], s * m[2], s * m[3]}}; }

    bool is_identity(double tol = 1e-12) const {
        return std::abs(m[0] - cplx(1)) < tol && std::abs(m[1]) < tol && std::abs(m[2]) < tol &&
               std::abs(m[3] - cplx(1)) < tol;
    }
    bool is_unitary(double tol = 1e-12) const {
        Mat2 p = dagger() * (*this);
        return p.is_identity(tol);
    }

    std::vector<cplx> as_vec() const { return {m[0], m[1], m[2], m[3]}; }
};

// M = norm * (q0 m0 + q1 m1) with m0, m1 unitary; q0 = (1+s)/2, q1 = (1-s)/2.
struct Svd2 {
    double norm = 0;
    double q0 = 1, q1 = 0;
    Mat2 m0, m1;
};

inline Svd2 decompose_op(const Mat2& op) {
    Svd2 out;
    if (op.is_unitary(1e-12)) {
        out.norm = 1;
        out.m0 = op;
        out.m1 = op * Mat2::pauli_z();
        return out;
    }
    // eigen-decomposition of M^dag M
    Mat2 h = op.dagger() * op;
    double a = h.m[0].real(), c = h.m[3].real();
    cplx b = h.m[1];
    double tr = a + c;
    double disc = std::sqrt(std::max(0.0, (a - c) * (a - c) + 4 * std::norm(b)));
    double lam0 = (tr + disc) / 2, lam1 = std::max(0.0, (tr - disc) / 2);
    double s0 = std::sqrt(std::max(0.0, lam0)), s1 = std::sqrt(lam1);
    if (s0 < 1e-15) {
        out.norm = 0;
        return out;
    }
    // eigenvector for lam0
    std::array<cplx, 2> v0;
    if (std::abs(b) > 1e-15) {
        v0 = {b, cplx(lam0 - a)};
    } else {
        v0 = (a >= c) ? std::array<cplx, 2>{cplx(1), cplx(0)} : std::array<cplx, 2>{cplx(0), cplx(1)};
    }
    double nv = std::sqrt(std::norm(v0[0]) + std::norm(v0[1]));
    v0 = {v0[0] / nv, v0[1] / nv};
    std::array<cplx, 2> v1{-std::conj(v0[1]), std::conj(v0[0])};

    auto apply = [&](const std::array<cplx, 2>& v) {
        return std::array<cplx, 2>{op.m[0] * v[0] + op.m[1] * v[1], op.m[2] * v[0] + op.m[3] * v[1]};
    };
    std::array<cplx, 2> u0 = apply(v0);
    for (auto& z : u0) z /= s0;
    std::array<cplx, 2> u1;
    // eigensolving M^dag M loses half the precision, so a rank-deficient
    // sigma_1 shows up at the 1e-8 scale; re-orthogonalize in either branch
    if (s1 > 1e-6 * s0) {
        u1 = apply(v1);
        cplx overlap = std::conj(u0[0]) * u1[0] + std::conj(u0[1]) * u1[1];
        u1 = {u1[0] - overlap * u0[0], u1[1] - overlap * u0[1]};
        double nu = std::sqrt(std::norm(u1[0]) + std::norm(u1[1]));
        if (nu > 1e-12) {
            u1 = {u1[0] / nu, u1[1] / nu};
        } else {
            u1 = {-std::conj(u0[1]), std::conj(u0[0])};
        }
    } else {
        s1 = 0;
        u1 = {-std::conj(u0[1]), std::conj(u0[0])};
    }
    Mat2 u{{u0[0], u1[0], u0[1], u1[1]}};
    Mat2 v{{std::conj(v0[0]), std::conj(v0[1]), std::conj(v1[0]), std::conj(v1[1])}};
    double s = std::min(1.0, std::max(0.0, s1 / s0));
    out.norm = s0;
    out.q0 = (1 + s) / 2;
    out.q1 = (1 - s) / 2;
    out.m0 = u * v;
    out.m1 = u * Mat2::pauli_z() * v;
    return out;
}

// Phi = <0^n| H Ug (O_1 (x) ... (x) O_n) Uf H |0^n> over a graph carrying the
// two-local f, g.
struct GraphForrelationInstance {
    Graph graph;
    TwoLocalFunction f, g;
    std::vector<Mat2> ops;
    PartitionPlan plan;
};

inline GraphForrelationInstance make_instance(Graph graph, TwoLocalFunction f, TwoLocalFunction g,
                                              std::vector<Mat2> ops) {
    if (int(ops.size()) != graph.n) throw std::invalid_argument("make_instance: one operator per vertex");
    for (const auto& op : ops) {
        Svd2 d = decompose_op(op);
        if (d.norm > 1.0 + 1e-9) throw std::invalid_argument("make_instance: operator norm exceeds 1");
    }
    GraphForrelationInstance inst;
    inst.plan = plan_partition(graph);
    inst.graph = std::move(graph);
    inst.f = std::move(f);
    inst.g = std::move(g);
    inst.ops = std::move(ops);
    return inst;
}

// brute-force oracle: dense state-vector evaluation
inline cplx phi_graph_exact(const GraphForrelationInstance& inst, int cap = 20) {
    const int n = inst.graph.n;
    if (n > cap) throw std::invalid_argument("phi_graph_exact: n above cap");
    const size_t dim = size_t(1) << n;
    cvec v(dim, cplx(std::pow(2.0, -0.5 * n), 0));
    for (size_t x = 0; x < dim; ++x) v[x] *= inst.f.eval_bits(x);
    for (int q = 0; q < n; ++q) {
        const Mat2& o = inst.ops[q];
        const size_t stride = size_t(1) << q;
        for (size_t base = 0; base < dim; base += 2 * stride)
            for (size_t i = base; i < base + stride; ++i) {
                cplx z0 = v[i], z1 = v[i + stride];
                v[i] = o.m[0] * z0 + o.m[1] * z1;
                v[i + stride] = o.m[2] * z0 + o.m[3] * z1;
            }
    }
    for (size_t x = 0; x < dim; ++x) v[x] *= inst.g.eval_bits(x);
    hadamard_all_inplace(v, n);
    return v[0];
}

enum class Side { alpha, beta };

// Lemma-style amplitude <x|alpha> (or <x|beta>) via restriction to one side
// of the partition and a treewidth sum over its decomposition.
inline cplx amplitude(const GraphForrelationInstance& inst, Side side, uint64_t x) {
    const int n = inst.graph.n;
    const bool alpha = side == Side::alpha;
    const auto& free_verts = alpha ? inst.plan.part.a : inst.plan.part.b;
    const auto& td = alpha ? inst.plan.td_a : inst.plan.td_b;
    const TwoLocalFunction& h = alpha ? inst.f : inst.g;

    std::vector<int> fixed(n, -1);
    for (int v = 0; v < n; ++v) {
        bool on_free_side = (inst.plan.part.side[v] == 0) == alpha;
        if (!on_free_side) fixed[v] = int((x >> v) & 1);
    }
    Restriction r = restrict_function(h, fixed);
    // per-vertex operator matrix elements
    for (size_t loc = 0; loc < free_verts.size(); ++loc) {
        int v = free_verts[loc];
        int xv = int((x >> v) & 1);
        const Mat2& o = inst.ops[v];
        for (int y = 0; y < 2; ++y)
            r.h.vertex_terms[loc][y] *= alpha ? o(xv, y) : o(y, xv);
    }
    r.h.scalar *= std::pow(2.0, -0.5 * n);
    cplx total = free_verts.empty() ? r.h.scalar : sum_treewidth(r.h, td, false);
    return alpha ? total : std::conj(total);
}

// P_l for the current prefix (local A bits 0..cur assigned in xa): the
// doubled-graph sum of Lemma 7, where the marginalized C vertices get a
// primed copy at id na+v. 2^{-n} prefactor included.
inline double augmented_marginal(const GraphForrelationInstance& inst, const Restriction& rf,
                                 const std::vector<int>& xa, int cur) {
    const int na = rf.h.graph.n;
    const int nc = cur + 1;  // local ids 0..cur are C, the rest are D
    TwoLocalFunction h;
    h.d = 2;
    h.scalar = rf.h.scalar * std::conj(rf.h.scalar) * std::pow(2.0, -double(inst.graph.n));

    std::vector<std::vector<cplx>> vterm(na + nc, std::vector<cplx>(2, cplx(1)));
    for (int v = 0; v < na; ++v) {
        const auto& base = rf.h.vertex_terms[v];
        const Mat2& o = inst.ops[rf.old_of_new[v]];
        if (v < nc) {
            for (int y = 0; y < 2; ++y) {
                vterm[v][y] = std::conj(base[y] * o(xa[v], y));
                vterm[na + v][y] = base[y] * o(xa[v], y);
            }
        } else {
            for (int y = 0; y < 2; ++y) vterm[v][y] = base[y] * std::conj(base[y]);
        }
    }

    std::vector<std::pair<std::pair<int, int>, std::vector<cplx>>> eterms;
    for (size_t e = 0; e < rf.h.graph.edges.size(); ++e) {
        auto [u, v] = rf.h.graph.edges[e];  // u < v, local A ids
        const auto& t = rf.h.edge_terms[e];
        std::vector<cplx> tconj(4), tsq(4);
        for (int i = 0; i < 4; ++i) {
            tconj[i] = std::conj(t[i]);
            tsq[i] = t[i] * std::conj(t[i]);
        }
        bool cu = u < nc, cv = v < nc;
        if (cu && cv) {
            eterms.push_back({{u, v}, tconj});
            eterms.push_back({{na + u, na + v}, t});
        } else if (!cu && !cv) {
            eterms.push_back({{u, v}, tsq});
        } else {  // u in C, v in D (u < v always puts the C endpoint first)
            eterms.push_back({{u, v}, tconj});
            eterms.push_back({{na + u, v}, t});
        }
    }

    Graph tilde(na + nc);
    for (auto& [edge, term] : eterms) tilde.add_edge(edge.first, edge.second);
    h.graph = std::move(tilde);
    h.vertex_terms = std::move(vterm);
    h.edge_terms.assign(h.graph.edges.size(), {});
    for (auto& [edge, term] : eterms) {
        auto [u, v] = edge;
        int idx = h.graph.edge_index(u, v);
        if (u > v) {  // tables keep the smaller endpoint first
            h.edge_terms[idx] = {term[0], term[2], term[1], term[3]};
        } else {
            h.edge_terms[idx] = std::move(term);
        }
    }

    // doubled decomposition: each bag of td_A gains the copies of its C
    // members; width at most 2w+1
    TreeDecomposition td = inst.plan.td_a;
    for (auto& bag : td.bags) {
        std::vector<int> extra;
        for (int v : bag)
            if (v < nc) extra.push_back(na + v);
        bag.insert(bag.end(), extra.begin(), extra.end());
        std::sort(bag.begin(), bag.end());
    }

    return sum_treewidth(h, td, false).real();
}

inline void require_unitary_ops(const GraphForrelationInstance& inst, double tol = 1e-9) {
    for (int v = 0; v < inst.graph.n; ++v)
        if (inst.plan.part.side[v] == 0 && !inst.ops[v].is_unitary(tol))
            throw std::invalid_argument("sampler requires unitary operators; decompose first");
}

// Marginal-chain sampler (Lemma 7): B bits are uniform by the closed form,
// A bits come from marginal ratios over the augmented graph. Requires
// unitary operators on side A.
inline uint64_t sample_alpha_marginals(const GraphForrelationInstance& inst, RngStream& rng) {
    require_unitary_ops(inst);
    const int n = inst.graph.n;
    const auto& a_verts = inst.plan.part.a;
    const auto& b_verts = inst.plan.part.b;
    const int na = int(a_verts.size());

    uint64_t x = 0;
    for (int v : b_verts)
        if (rng.bit()) x |= uint64_t(1) << v;
    if (na == 0) return x;

    std::vector<int> fixed(n, -1);
    for (int v : b_verts) fixed[v] = int((x >> v) & 1);
    Restriction rf = restrict_function(inst.f, fixed);

    std::vector<int> xa(na, -1);
    double p_prev = std::pow(2.0, -double(b_verts.size()));
    for (int cur = 0; cur < na; ++cur) {
        xa[cur] = 0;
        double p0 = augmented_marginal(inst, rf, xa, cur);
        double ratio = p0 / p_prev;
        if (ratio < -1e-6 || ratio > 1 + 1e-6)
            throw std::runtime_error("sample_alpha_marginals: marginal ratio out of range");
        ratio = std::min(1.0, std::max(0.0, ratio));
        if (rng.real() < ratio) {
            xa[cur] = 0;
            p_prev = std::max(p0, 1e-300);
        } else {
            xa[cur] = 1;
            p_prev = std::max(p_prev - p0, 1e-300);
        }
    }
    for (int loc = 0; loc < na; ++loc)
        if (xa[loc]) x |= uint64_t(1) << a_verts[loc];
    return x;
}

// Reusable machinery for the Appendix-A linear-time sampler: the easy set
// (side B, identity operators) and the staged network structure are fixed
// across draws; only the restricted gate diagonals and the operators change.
struct LinearSamplerPlan {
    QuditSystem full;                // gates carrying U_f, identity-op side B
    QuditSystem reduced;             // side A skeleton; diagonals refreshed per draw
    std::vector<int> old_of_new;     // reduced qudit -> graph vertex
    std::vector<int> new_of_old;     // graph vertex -> reduced qudit (-1 on B)
    std::vector<int> b_verts;
    StagedNodeNetwork net;           // built once against `reduced`
    std::vector<int> outcome_buf;

    static LinearSamplerPlan build(const GraphForrelationInstance& inst) {
        LinearSamplerPlan plan;
        const int n = inst.graph.n;
        plan.full = QuditSystem::make(n, 2);
        for (int v = 0; v < n; ++v)
            plan.full.chi[v] = {cplx(0.5), cplx(0.5), cplx(0.5), cplx(0.5)};  // |+><+|
        for (int v = 0; v < n; ++v) {
            DiagonalGate g;
            g.support = {v};
            g.diag = {inst.f.vertex_terms[v][0], inst.f.vertex_terms[v][1]};
            plan.full.gates.push_back(std::move(g));
        }
        for (size_t e = 0; e < inst.graph.edges.size(); ++e) {
            auto [u, v] = inst.graph.edges[e];
            DiagonalGate g;
            g.support = {u, v};
            const auto& t = inst.f.edge_terms[e];
            g.diag = {t[0], t[2], t[1], t[3]};  // support[0]=u fastest, table is [a_u*2+a_v]
            plan.full.gates.push_back(std::move(g));
        }
        plan.new_of_old.assign(n, -1);
        plan.old_of_new = inst.plan.part.a;
        plan.b_verts = inst.plan.part.b;
        for (size_t i = 0; i < plan.old_of_new.size(); ++i) plan.new_of_old[plan.old_of_new[i]] = int(i);
        plan.outcome_buf.assign(n, -1);

        plan.reduced = QuditSystem::make(int(plan.old_of_new.size()), 2);
        for (size_t i = 0; i < plan.old_of_new.size(); ++i)
            plan.reduced.chi[i] = plan.full.chi[plan.old_of_new[i]];
        // placeholder outcomes fix the structure
        std::vector<int> zeros(n, -1);
        for (int v : plan.b_verts) zeros[v] = 0;
        for (const auto& g : plan.full.gates)
            plan.reduced.gates.push_back(restrict_gate(g, zeros, plan.new_of_old, 2));
        plan.refresh_ops(inst);
        if (plan.reduced.n > 0) {
            // td_A is already in side-A local ids, matching the reduced system
            plan.net = build_network(plan.reduced, inst.plan.td_a);
        }
        return plan;
    }

    void refresh_ops(const GraphForrelationInstance& inst) {
        for (size_t i = 0; i < old_of_new.size(); ++i)
            reduced.ops[i].assign(inst.ops[old_of_new[i]].m.begin(), inst.ops[old_of_new[i]].m.end());
    }

    uint64_t draw(const GraphForrelationInstance& inst, RngStream& rng) {
        const int n = inst.graph.n;
        uint64_t x = 0;
        std::fill(outcome_buf.begin(), outcome_buf.end(), -1);
        for (int v : b_verts) {
            int bit = rng.bit();
            outcome_buf[v] = bit;
            if (bit) x |= uint64_t(1) << v;
        }
        if (reduced.n == 0) return x;
        for (size_t g = 0; g < full.gates.size(); ++g)
            reduced.gates[g] = restrict_gate(full.gates[g], outcome_buf, new_of_old, 2);
        refresh_ops(inst);
        net.sys = &reduced;
        refresh_gate_diagonals(net);
        auto res = tn_sample(net, rng);
        if (!res.valid) throw std::runtime_error("sample_alpha_linear: zero distribution");
        for (int i = 0; i < reduced.n; ++i)
            if (res.outcome[i] > 0) x |= uint64_t(1) << old_of_new[i];
        return x;
    }
};

// Appendix-A linear-time sampler: easy-qudit removal (identity operators on
// side B) followed by the staged tensor network walk over td_A. Use a
// LinearSamplerPlan directly when drawing repeatedly.
inline uint64_t sample_alpha_linear(const GraphForrelationInstance& inst, RngStream& rng) {
    require_unitary_ops(inst);
    LinearSamplerPlan plan = LinearSamplerPlan::build(inst);
    return plan.draw(inst, rng);
}

enum class SamplerKind { marginal, linear };

struct PhiEstimate {
    cplx value{0, 0};
    double epsilon = 0;
    uint64_t samples = 0;
    bool annihilated = false;
    double var_r = 0;     // empirical variance of the ratio estimator
    double var_r_se = 0;  // standard error of the second-moment estimate
};

struct PhiGraphOptions {
    double epsilon = 0.1;
    uint64_t samples_override = 0;
    SamplerKind sampler = SamplerKind::linear;
    int jobs = 1;
    uint64_t seed_label = 0;  // distinguishes independent estimates
};

// Theorem 5: SVD-decompose every operator into unitaries, Monte Carlo over
// the product distribution q(z) and the Van den Nest ratio estimator.
inline PhiEstimate phi_graph_estimate(const GraphForrelationInstance& inst,
                                      const PhiGraphOptions& opt, RngStream& rng) {
    if (opt.epsilon <= 0 && opt.samples_override == 0)
        throw std::invalid_argument("phi_graph_estimate: epsilon must be positive");
    PhiEstimate est;
    est.epsilon = opt.epsilon;
    const int n = inst.graph.n;

    std::vector<Svd2> decos(n);
    double omega = 1;
    for (int v = 0; v < n; ++v) {
        decos[v] = decompose_op(inst.ops[v]);
        omega *= decos[v].norm;
    }
    if (omega == 0) {
        est.annihilated = true;
        return est;
    }
    uint64_t s = opt.samples_override ? opt.samples_override
                                      : uint64_t(std::ceil(100.0 / (opt.epsilon * opt.epsilon)));
    est.samples = s;

    uint64_t master = rng.u64();
    std::vector<cplx> ratios(s);
    std::vector<char> failed(std::max<size_t>(1, opt.jobs), 0);
    const int workers = std::max(1, opt.jobs);
    parallel_for(workers, workers, [&](size_t w) {
        GraphForrelationInstance local = inst;  // one copy per worker, ops swapped per draw
        std::optional<LinearSamplerPlan> lp;
        if (opt.sampler == SamplerKind::linear) lp.emplace(LinearSamplerPlan::build(local));
        for (uint64_t i = w; i < s; i += workers) {
            RngStream stream = RngStream::derive(master, "phi-graph-sample", opt.seed_label, i);
            bool ok = false;
            for (int attempt = 0; attempt < 100 && !ok; ++attempt) {
                for (int v = 0; v < n; ++v) {
                    bool z1 = stream.real() < decos[v].q1;
                    local.ops[v] = z1 ? decos[v].m1 : decos[v].m0;
                }
                uint64_t x = lp ? lp->draw(local, stream) : sample_alpha_marginals(local, stream);
                cplx amp_a = amplitude(local, Side::alpha, x);
                if (std::abs(amp_a) < 1e-12) continue;  // measure-zero guard
                cplx amp_b = amplitude(local, Side::beta, x);
                ratios[i] = std::conj(amp_b / amp_a);
                ok = true;
            }
            if (!ok) { failed[w] = 1; return; }
        }
    });
    for (char f : failed)
        if (f) throw std::runtime_error("phi_graph_estimate: persistent zero-amplitude samples");

    cplx mean = 0;
    double second = 0, fourth = 0;
    for (const cplx& r : ratios) {
        mean += r;
        second += std::norm(r);
        fourth += std::norm(r) * std::norm(r);
    }
    mean /= double(s);
    second /= double(s);
    fourth /= double(s);
    est.value = omega * mean;
    est.var_r = std::max(0.0, second - std::norm(mean));
    est.var_r_se = std::sqrt(std::max(0.0, fourth - second * second) / double(s));
    return est;
}

// Appendix F reduction: from a unit-modulus two-local h build f, g with
// <0|H Uf H Ug H|0> = <0|H Uh H|0>. Uses Ug = (S^dag)^(x)n and
// Uf = e^{i pi n/4} Uh Ug.
inline std::pair<TwoLocalFunction, TwoLocalFunction> iqp_to_forrelation(const TwoLocalFunction& h) {
    const int n = h.graph.n;
    TwoLocalFunction g = TwoLocalFunction::ones(h.graph, 2);
    for (int v = 0; v < n; ++v) g.vertex_terms[v] = {cplx(1), cplx(0, -1)};
    TwoLocalFunction f = h;
    f.scalar *= std::polar(1.0, M_PI * n / 4.0);
    for (int v = 0; v < n; ++v)
        for (int y = 0; y < 2; ++y) f.vertex_terms[v][y] *= g.vertex_terms[v][y];
    return {f, g};
}

}  // namespace forr
