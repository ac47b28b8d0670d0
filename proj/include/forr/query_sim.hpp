#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "forr/fwht.hpp"
#include "forr/oracle.hpp"
#include "forr/rng.hpp"

namespace forr {

// One operator M_j of the query circuit: either a structured tag or a dense
// 2^m x 2^m matrix (row-major).
struct QubitOperator {
    enum class Kind { identity, hadamard_all, single_qubit, dense };
    Kind kind = Kind::identity;
    int qubit = 0;                  // single_qubit only
    std::array<cplx, 4> u2{};       // row-major 2x2, single_qubit only
    std::vector<cplx> dense;        // dense only

    static QubitOperator identity() { return {}; }
    static QubitOperator hadamard_all() {
        QubitOperator op;
        op.kind = Kind::hadamard_all;
        return op;
    }
    static QubitOperator single(int q, std::array<cplx, 4> u) {
        QubitOperator op;
        op.kind = Kind::single_qubit;
        op.qubit = q;
        op.u2 = u;
        return op;
    }
    static QubitOperator from_dense(std::vector<cplx> m) {
        QubitOperator op;
        op.kind = Kind::dense;
        op.dense = std::move(m);
        return op;
    }

    void apply(cvec& v, int m, bool dagger) const {
        const size_t dim = size_t(1) << m;
        switch (kind) {
            case Kind::identity:
                return;
            case Kind::hadamard_all:
                hadamard_all_inplace(v, m);
                return;
            case Kind::single_qubit: {
                std::array<cplx, 4> u = u2;
                if (dagger) u = {std::conj(u2[0]), std::conj(u2[2]), std::conj(u2[1]), std::conj(u2[3])};
                const size_t stride = size_t(1) << qubit;
                for (size_t base = 0; base < dim; base += 2 * stride)
                    for (size_t i = base; i < base + stride; ++i) {
                        cplx a = v[i], b = v[i + stride];
                        v[i] = u[0] * a + u[1] * b;
                        v[i + stride] = u[2] * a + u[3] * b;
                    }
                return;
            }
            case Kind::dense: {
                if (dense.size() != dim * dim) throw std::invalid_argument("dense operator has wrong size");
                cvec out(dim, cplx(0));
                for (size_t r = 0; r < dim; ++r)
                    for (size_t c = 0; c < dim; ++c)
                        out[r] += (dagger ? std::conj(dense[c * dim + r]) : dense[r * dim + c]) * v[c];
                v = std::move(out);
                return;
            }
        }
    }

    // spectral norm via power iteration on M^dag M (dense only; structured
    // operators all have norm exactly 1)
    double spectral_norm(int m) const {
        if (kind != Kind::dense) return 1.0;
        const size_t dim = size_t(1) << m;
        cvec v(dim);
        RngStream rng(0xabcd);
        for (auto& z : v) z = cplx(rng.uniform(-1, 1), rng.uniform(-1, 1));
        double lambda = 0;
        for (int it = 0; it < 60; ++it) {
            cvec w = v;
            apply(w, m, false);
            apply(w, m, true);
            double nrm = norm2(w);
            if (nrm < 1e-300) return 0;
            lambda = nrm;
            for (auto& z : w) z /= nrm;
            v = std::move(w);
        }
        return std::sqrt(lambda);
    }
};

// q = <0^m| M_1 U_{f_1} M_2 ... U_{f_k} M_{k+1} |0^m>, oracles act on the
// low n bits of the index.
struct QueryCircuit {
    int m = 0;
    int n = 0;
    std::vector<QubitOperator> ops;               // k+1 operators
    std::vector<const BooleanOracle*> oracles;    // k oracles

    int k() const { return int(oracles.size()); }

    void check(int dense_cap = 12, int structured_cap = 24) const {
        if (n > m) throw std::invalid_argument("query circuit: n > m");
        if (ops.size() != oracles.size() + 1) throw std::invalid_argument("query circuit: need k+1 operators");
        bool any_dense = false;
        for (const auto& op : ops) any_dense |= op.kind == QubitOperator::Kind::dense;
        if (m > (any_dense ? dense_cap : structured_cap))
            throw std::invalid_argument("query circuit: qubit count above cap");
        if (m <= 8)
            for (const auto& op : ops)
                if (op.spectral_norm(m) > 1.0 + 1e-9)
                    throw std::invalid_argument("query circuit: operator norm exceeds 1");
    }
};

inline cplx amplitude_exact(const QueryCircuit& c) {
    c.check();
    const size_t dim = size_t(1) << c.m;
    const size_t mask = (size_t(1) << c.n) - 1;
    cvec v(dim, cplx(0));
    v[0] = 1;
    c.ops.back().apply(v, c.m, false);
    for (int j = c.k() - 1; j >= 0; --j) {
        // U_{f_{j+1}}: cache the 2^n oracle values once (2^n queries)
        std::vector<double> fv(mask + 1);
        for (size_t z = 0; z <= mask; ++z) fv[z] = c.oracles[j]->evaluate(z);
        for (size_t i = 0; i < dim; ++i) v[i] *= fv[i & mask];
        c.ops[j].apply(v, c.m, false);
    }
    return v[0];
}

// Draw z ~ p_alpha(z) = |Pi(z) alpha|^2 / |alpha|^2 over the low n bits.
inline uint64_t sample_projection(const cvec& alpha, int n, RngStream& rng) {
    const size_t zdim = size_t(1) << n;
    const size_t mask = zdim - 1;
    std::vector<double> mass(zdim, 0.0);
    double total = 0;
    for (size_t i = 0; i < alpha.size(); ++i) {
        double w = std::norm(alpha[i]);
        mass[i & mask] += w;
        total += w;
    }
    if (total < 1e-24) throw std::runtime_error("sample_projection: zero vector");
    double u = rng.real() * total;
    double acc = 0;
    for (size_t z = 0; z < zdim; ++z) {
        acc += mass[z];
        if (u < acc) return z;
    }
    return zdim - 1;
}

struct KfoldEstimate {
    cplx value{0, 0};
    double epsilon = 0;
    uint64_t samples_per_level = 0;   // L in the sampling branch
    uint64_t queries_used = 0;
    bool exact_branch = false;
    bool annihilated = false;
    std::vector<double> level_norms;  // |phi_j|^2 per level in the sampling branch
};

// Query budget B of Eq. Bk.
inline uint64_t kfold_budget(int n, int k, double eps) {
    long double inner = powl(2.0L, (long double)n * (1.0L - 1.0L / k)) *
                        powl((long double)(eps * eps) / 400.0L, -1.0L / k);
    return 2ull * k * (uint64_t)ceill(inner - 1e-9L);
}

struct EstimateOptions {
    double epsilon = 0.1;
    uint64_t samples_override = 0;  // force the sampling branch with this L
};

// Theorem 7 estimator: levelwise importance-sampled states phi_j, final
// estimate X_k = <phi_k| M_{k+1} |0^m>.
inline KfoldEstimate amplitude_estimate(const QueryCircuit& c, const EstimateOptions& opt, RngStream& rng) {
    if (opt.epsilon <= 0 && opt.samples_override == 0)
        throw std::invalid_argument("amplitude_estimate: epsilon must be positive");
    c.check();
    const int k = c.k();
    const int n = c.n;
    KfoldEstimate est;
    est.epsilon = opt.epsilon;

    uint64_t l = 0;
    if (opt.samples_override > 0) {
        l = opt.samples_override;
    } else {
        uint64_t budget = kfold_budget(n, k, opt.epsilon);
        if (budget >= uint64_t(k) << n) {
            est.exact_branch = true;
            est.value = amplitude_exact(c);
            est.queries_used = uint64_t(k) << n;
            return est;
        }
        l = budget / k;
    }
    est.samples_per_level = l;
    est.queries_used = uint64_t(k) * l;

    const size_t dim = size_t(1) << c.m;
    const size_t mask = (size_t(1) << n) - 1;
    const size_t zdim = size_t(1) << n;
    cvec phi(dim, cplx(0));
    phi[0] = 1;

    std::vector<double> mass(zdim);
    std::vector<double> cum(zdim);
    std::vector<cplx> factor(zdim);
    for (int j = 0; j < k; ++j) {
        cvec psi = phi;
        c.ops[j].apply(psi, c.m, true);  // M_j^dag phi_{j-1}
        double total = 0;
        std::fill(mass.begin(), mass.end(), 0.0);
        for (size_t i = 0; i < dim; ++i) {
            double w = std::norm(psi[i]);
            mass[i & mask] += w;
            total += w;
        }
        if (total < 1e-28) {
            est.annihilated = true;
            est.value = 0;
            return est;
        }
        double acc = 0;
        for (size_t z = 0; z < zdim; ++z) { acc += mass[z]; cum[z] = acc; }
        std::fill(factor.begin(), factor.end(), cplx(0));
        for (uint64_t i = 0; i < l; ++i) {
            double u = rng.real() * total;
            size_t z = std::lower_bound(cum.begin(), cum.end(), u) - cum.begin();
            if (z >= zdim) z = zdim - 1;
            double p = mass[z] / total;
            factor[z] += cplx(c.oracles[j]->evaluate(z) / (p * double(l)), 0);
        }
        for (size_t i = 0; i < dim; ++i) phi[i] = psi[i] * factor[i & mask];
        double nrm = 0;
        for (const cplx& z : phi) nrm += std::norm(z);
        est.level_norms.push_back(nrm);
    }

    cvec rhs(dim, cplx(0));
    rhs[0] = 1;
    c.ops.back().apply(rhs, c.m, false);
    cplx x = 0;
    for (size_t i = 0; i < dim; ++i) x += std::conj(phi[i]) * rhs[i];
    est.value = x;
    return est;
}

// Builds the k-fold forrelation circuit (all M_j = H^{(x)n}, m = n).
inline QueryCircuit make_kfold_circuit(const std::vector<const BooleanOracle*>& oracles) {
    if (oracles.empty()) throw std::invalid_argument("kfold: need at least one oracle");
    QueryCircuit c;
    c.n = c.m = oracles.front()->n();
    for (const auto* f : oracles)
        if (f->n() != c.n) throw std::invalid_argument("kfold: oracles must share n");
    c.oracles = oracles;
    c.ops.assign(oracles.size() + 1, QubitOperator::hadamard_all());
    return c;
}

inline KfoldEstimate kfold_phi(const std::vector<const BooleanOracle*>& oracles,
                               const EstimateOptions& opt, RngStream& rng) {
    return amplitude_estimate(make_kfold_circuit(oracles), opt, rng);
}

inline cplx kfold_phi_exact(const std::vector<const BooleanOracle*>& oracles) {
    return amplitude_exact(make_kfold_circuit(oracles));
}

// Acceptance probability of a t-query algorithm V_t U_{f_t} ... V_1 U_{f_1} V_0
// measuring `output_qubit`, expressed as a k = 2t amplitude: the mirrored
// chain with M_{t+1} = V_t^dag |1><1| V_t.
inline QueryCircuit make_query_probability_circuit(int m, int n,
                                                   const std::vector<QubitOperator>& v,
                                                   const std::vector<const BooleanOracle*>& oracles,
                                                   int output_qubit) {
    const int t = int(oracles.size());
    if (int(v.size()) != t + 1) throw std::invalid_argument("expect t+1 interleaving operators");
    const size_t dim = size_t(1) << m;
    auto dense_of = [&](const QubitOperator& op, bool dagger) {
        std::vector<cplx> out(dim * dim, cplx(0));
        for (size_t col = 0; col < dim; ++col) {
            cvec e(dim, cplx(0));
            e[col] = 1;
            op.apply(e, m, dagger);
            for (size_t row = 0; row < dim; ++row) out[row * dim + col] = e[row];
        }
        return out;
    };
    QueryCircuit c;
    c.m = m;
    c.n = n;
    // the chain reads <0| V0^dag U1 V1^dag ... Ut (Vt^dag P Vt) Ut ... U1 V0 |0>
    for (int j = 0; j < t; ++j) c.oracles.push_back(oracles[j]);
    for (int j = t; j >= 1; --j) c.oracles.push_back(oracles[j - 1]);
    c.ops.push_back(QubitOperator::from_dense(dense_of(v[0], true)));
    for (int j = 1; j <= t; ++j) {
        if (j < t) {
            c.ops.push_back(QubitOperator::from_dense(dense_of(v[j], true)));
        } else {
            // middle operator: V_t^dag |1><1|_q V_t
            std::vector<cplx> vt = dense_of(v[t], false);
            std::vector<cplx> mid(dim * dim, cplx(0));
            for (size_t r = 0; r < dim; ++r) {
                if (!((r >> output_qubit) & 1)) continue;
                for (size_t a = 0; a < dim; ++a)
                    for (size_t b = 0; b < dim; ++b)
                        mid[a * dim + b] += std::conj(vt[r * dim + a]) * vt[r * dim + b];
            }
            c.ops.push_back(QubitOperator::from_dense(std::move(mid)));
        }
    }
    for (int j = t - 1; j >= 0; --j) c.ops.push_back(QubitOperator::from_dense(dense_of(v[j], false)));
    return c;
}

}  // namespace forr
