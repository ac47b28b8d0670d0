#pragma once

// Shared generators and dense oracles for the acceptance suite.

#include <set>

#include "forr/graph_forrelation.hpp"
#include "forr/qaoa.hpp"
#include "forr/tn_sampler.hpp"

namespace support {

using namespace forr;

inline cplx random_unit(RngStream& rng) { return std::polar(1.0, rng.uniform(0, 2 * M_PI)); }

inline TwoLocalFunction random_two_local(const Graph& g, RngStream& rng) {
    auto h = TwoLocalFunction::ones(g);
    for (auto& t : h.vertex_terms)
        for (auto& z : t) z = random_unit(rng);
    for (auto& t : h.edge_terms)
        for (auto& z : t) z = random_unit(rng);
    return h;
}

inline Mat2 random_unitary(RngStream& rng) {
    double theta = rng.uniform(0, 2 * M_PI), alpha = rng.uniform(0, 2 * M_PI);
    cplx w = std::polar(1.0, rng.uniform(0, 2 * M_PI));
    return {{w * std::cos(theta), w * std::polar(std::sin(theta), alpha),
             -w * std::polar(std::sin(theta), -alpha), w * std::cos(theta)}};
}

inline Mat2 random_subnormalized(RngStream& rng) {
    Mat2 m;
    for (auto& z : m.m) z = cplx(rng.uniform(-1, 1), rng.uniform(-1, 1));
    Svd2 d = decompose_op(m);
    double scale = rng.uniform(0.4, 1.0) / d.norm;
    for (auto& z : m.m) z *= scale;
    return m;
}

inline GraphForrelationInstance random_instance(const Graph& g, RngStream& rng, bool unitary_ops) {
    std::vector<Mat2> ops;
    for (int v = 0; v < g.n; ++v)
        ops.push_back(unitary_ops ? random_unitary(rng) : random_subnormalized(rng));
    return make_instance(g, random_two_local(g, rng), random_two_local(g, rng), std::move(ops));
}

// dense |alpha> / |beta> state vectors
inline cvec dense_side(const GraphForrelationInstance& inst, Side side) {
    const int n = inst.graph.n;
    const size_t dim = size_t(1) << n;
    cvec v(dim, cplx(std::pow(2.0, -0.5 * n), 0));
    for (size_t x = 0; x < dim; ++x)
        v[x] *= side == Side::alpha ? inst.f.eval_bits(x) : std::conj(inst.g.eval_bits(x));
    for (int q = 0; q < n; ++q) {
        bool apply = (inst.plan.part.side[q] == 0) == (side == Side::alpha);
        if (!apply) continue;
        Mat2 o = side == Side::alpha ? inst.ops[q] : inst.ops[q].dagger();
        const size_t stride = size_t(1) << q;
        for (size_t base = 0; base < dim; base += 2 * stride)
            for (size_t i = base; i < base + stride; ++i) {
                cplx z0 = v[i], z1 = v[i + stride];
                v[i] = o.m[0] * z0 + o.m[1] * z1;
                v[i + stride] = o.m[2] * z0 + o.m[3] * z1;
            }
    }
    return v;
}

// dense d^n x d^n evaluation of O U chi U^dag O^dag for qudit systems
struct DenseSystem {
    int n, d;
    size_t dim;
    std::vector<cplx> udiag, chi, o;

    explicit DenseSystem(const QuditSystem& sys) : n(sys.n), d(sys.d) {
        dim = 1;
        for (int i = 0; i < n; ++i) dim *= d;
        udiag.assign(dim, cplx(1));
        for (const auto& gate : sys.gates)
            for (size_t idx = 0; idx < dim; ++idx) {
                size_t gidx = 0, mul = 1;
                for (size_t k = 0; k < gate.support.size(); ++k) {
                    size_t digit = idx;
                    for (int q = 0; q < gate.support[k]; ++q) digit /= d;
                    gidx += (digit % d) * mul;
                    mul *= d;
                }
                udiag[idx] *= gate.diag[gidx];
            }
        auto kron_all = [&](const std::vector<std::vector<cplx>>& mats) {
            std::vector<cplx> out(dim * dim);
            for (size_t r = 0; r < dim; ++r)
                for (size_t c = 0; c < dim; ++c) {
                    cplx v = 1;
                    size_t rr = r, cc = c;
                    for (int q = 0; q < n; ++q) {
                        v *= mats[q][(rr % d) * d + (cc % d)];
                        rr /= d;
                        cc /= d;
                    }
                    out[r * dim + c] = v;
                }
            return out;
        };
        chi = kron_all(sys.chi);
        o = kron_all(sys.ops);
    }

    std::vector<cplx> final_state() const {
        std::vector<cplx> m(dim * dim);
        for (size_t y = 0; y < dim; ++y)
            for (size_t z = 0; z < dim; ++z)
                m[y * dim + z] = udiag[y] * chi[y * dim + z] * std::conj(udiag[z]);
        std::vector<cplx> om(dim * dim, cplx(0));
        for (size_t x = 0; x < dim; ++x)
            for (size_t y = 0; y < dim; ++y) {
                if (o[x * dim + y] == cplx(0)) continue;
                for (size_t z = 0; z < dim; ++z) om[x * dim + z] += o[x * dim + y] * m[y * dim + z];
            }
        std::vector<cplx> out(dim * dim, cplx(0));
        for (size_t x = 0; x < dim; ++x)
            for (size_t z = 0; z < dim; ++z) {
                if (om[x * dim + z] == cplx(0)) continue;
                for (size_t xp = 0; xp < dim; ++xp)
                    out[x * dim + xp] += om[x * dim + z] * std::conj(o[xp * dim + z]);
            }
        return out;
    }

    std::vector<double> distribution() const {
        auto m = final_state();
        std::vector<double> p(dim);
        double total = 0;
        for (size_t x = 0; x < dim; ++x) {
            p[x] = m[x * dim + x].real();
            total += p[x];
        }
        for (auto& v : p) v /= total;
        return p;
    }
};

inline QuditSystem random_system(int n, int d, RngStream& rng, bool unitary_gates,
                                 bool random_ops, bool local_gates = false) {
    QuditSystem sys = QuditSystem::make(n, d);
    for (int i = 0; i < n; ++i) {
        std::vector<cplx> v1(d), v2(d);
        double n1 = 0, n2 = 0;
        for (int j = 0; j < d; ++j) {
            v1[j] = cplx(rng.uniform(-1, 1), rng.uniform(-1, 1));
            v2[j] = cplx(rng.uniform(-1, 1), rng.uniform(-1, 1));
            n1 += std::norm(v1[j]);
            n2 += std::norm(v2[j]);
        }
        double w = rng.uniform(0.2, 0.8);
        for (int a = 0; a < d; ++a)
            for (int b = 0; b < d; ++b)
                sys.chi[i][a * d + b] =
                    w * v1[a] * std::conj(v1[b]) / n1 + (1 - w) * v2[a] * std::conj(v2[b]) / n2;
    }
    for (int k = 0; k < 2 * n; ++k) {
        DiagonalGate g;
        int arity = 1 + int(rng.index(2));
        std::set<int> sup;
        if (local_gates) {
            int base = int(rng.index(n));
            sup.insert(base);
            if (arity == 2 && base + 1 < n) sup.insert(base + 1);
        } else {
            while (int(sup.size()) < arity) sup.insert(int(rng.index(n)));
        }
        g.support.assign(sup.begin(), sup.end());
        size_t gd = 1;
        for (int i = 0; i < arity; ++i) gd *= d;
        for (size_t i = 0; i < gd; ++i)
            g.diag.push_back(unitary_gates ? std::polar(1.0, rng.uniform(0, 2 * M_PI))
                                           : std::polar(rng.uniform(0.3, 1.2), rng.uniform(0, 2 * M_PI)));
        sys.gates.push_back(std::move(g));
    }
    if (random_ops)
        for (int i = 0; i < n; ++i)
            for (int a = 0; a < d; ++a)
                for (int b = 0; b < d; ++b)
                    sys.ops[i][a * d + b] = cplx(rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5));
    return sys;
}

inline IsingInstance random_ising(Graph g, RngStream& rng, bool with_fields = false) {
    auto inst = IsingInstance::on(std::move(g));
    for (auto& j : inst.coupling) j = rng.bit() ? 1.0 : -1.0;
    if (with_fields)
        for (auto& h : inst.field) h = rng.uniform(-1, 1);
    return inst;
}

struct Stats {
    double sum = 0, sumsq = 0;
    uint64_t count = 0;
    void add(double x) { sum += x; sumsq += x * x; ++count; }
    double mean() const { return sum / double(count); }
    double variance() const { return sumsq / double(count) - mean() * mean(); }
    double sem() const { return std::sqrt(std::max(0.0, variance()) / double(count)); }
};

}  // namespace support
