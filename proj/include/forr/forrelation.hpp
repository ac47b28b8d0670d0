#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "forr/bits.hpp"
#include "forr/fwht.hpp"
#include "forr/oracle.hpp"
#include "forr/rng.hpp"

namespace forr {

// Coset {Ax+b : x in {0,1}^k} of F2^n; A is n x k with full column rank.
struct AffineSubspace {
    int n = 0, k = 0;
    BitMatrix a;
    BitVector b;
};

inline std::vector<uint64_t> enumerate_coset(const AffineSubspace& s) {
    if (s.n > 63) throw std::invalid_argument("enumerate_coset: n too large");
    std::vector<uint64_t> out;
    out.reserve(size_t(1) << s.k);
    BitVector cur = s.b;
    GrayCode gray(s.k);
    out.push_back(cur.as_u64());
    while (auto flipped = gray.advance()) {
        cur.xor_with(s.a.column(*flipped));
        out.push_back(cur.as_u64());
    }
    return out;
}

// Uniform over all k-dimensional affine subspaces: rejection-sample a full
// column rank n x k matrix (success probability > 0.288), uniform offset.
inline AffineSubspace sample_affine_subspace(int n, int k, RngStream& rng) {
    if (k < 1 || k > n) throw std::invalid_argument("sample_affine_subspace: need 1 <= k <= n");
    AffineSubspace s;
    s.n = n;
    s.k = k;
    for (;;) {
        BitMatrix a(n, k);
        for (int r = 0; r < n; ++r)
            for (int c = 0; c < k; ++c)
                if (rng.bit()) a.set(r, c, true);
        if (gf2_rank(a) == k) { s.a = std::move(a); break; }
    }
    s.b = BitVector(n);
    for (int i = 0; i < n; ++i)
        if (rng.bit()) s.b.set(i, true);
    return s;
}

// Phi(f,g) computed exactly as the 0^n amplitude of H Uf H Ug H |0^n>,
// three Hadamard passes and two diagonal multiplications. 2^{n+1} queries.
inline double phi_exact(const BooleanOracle& f, const BooleanOracle& g, int cap = 24) {
    const int n = f.n();
    if (g.n() != n) throw std::invalid_argument("phi_exact: oracle sizes differ");
    if (n > cap) throw std::invalid_argument("phi_exact: n above cap");
    const size_t dim = size_t(1) << n;
    std::vector<double> v(dim, std::pow(2.0, -0.5 * n));
    for (size_t x = 0; x < dim; ++x) v[x] *= g.evaluate(x);
    hadamard_all_inplace(v, n);
    for (size_t x = 0; x < dim; ++x) v[x] *= f.evaluate(x);
    hadamard_all_inplace(v, n);
    return v[0];
}

// mu(S,T) = 2^{n-k} <S| Uf H^n Ug |T>, evaluated exactly by the four-stage
// Gray-code pipeline. Runtime O(k^2 n + n 2^k), exactly 2^{k+1} queries.
inline double mu_affine(const BooleanOracle& f, const BooleanOracle& g,
                        const AffineSubspace& s, const AffineSubspace& t) {
    const int n = f.n();
    const int k = s.k;
    if (g.n() != n || s.n != n || t.n != n) throw std::invalid_argument("mu_affine: dimension mismatch");
    if (t.k != k) throw std::invalid_argument("mu_affine: S and T must share k");
    if (k > 30) throw std::invalid_argument("mu_affine: k too large");
    const size_t dim = size_t(1) << k;

    const BitMatrix& a = s.a;
    const BitVector& b = s.b;
    const BitMatrix& c = t.a;
    const BitVector& d = t.b;

    // column caches for O(n)-per-step updates
    std::vector<BitVector> a_cols(k), cta_cols(k);
    BitVector atd(k), ctb(k);
    BitMatrix cta = gf2_matmul(gf2_transpose(c), a);  // k x k
    for (int j = 0; j < k; ++j) {
        a_cols[j] = a.column(j);
        cta_cols[j] = cta.column(j);
        if (a_cols[j].dot(d)) atd.set(j, true);
        if (c.column(j).dot(b)) ctb.set(j, true);
    }

    // psi2[z] = sum over x with C^T A x = z of f(Ax+b)(-1)^{x.A^T d}
    std::vector<double> psi(dim, 0.0);
    {
        BitVector ax_b = b;
        uint64_t z = 0;
        int sign = 1;  // (-1)^{x . A^T d}
        GrayCode gray(k);
        psi[z] += sign * f.evaluate(ax_b.as_u64());
        while (auto j = gray.advance()) {
            ax_b.xor_with(a_cols[*j]);
            z ^= cta_cols[*j].as_u64();
            if (atd.get(*j)) sign = -sign;
            psi[z] += sign * f.evaluate(ax_b.as_u64());
        }
    }

    // psi3 = H^{(x)k} psi2
    hadamard_all_inplace(psi, k);

    // psi4 sum, Gray code over y
    double total = 0.0;
    {
        BitVector cy_d = d;
        int sign = 1;  // (-1)^{b^T C y}
        GrayCode gray(k);
        std::vector<BitVector> c_cols(k);
        for (int j = 0; j < k; ++j) c_cols[j] = c.column(j);
        uint64_t y = 0;
        total += psi[y] * sign * g.evaluate(cy_d.as_u64());
        while (auto j = gray.advance()) {
            cy_d.xor_with(c_cols[*j]);
            if (ctb.get(*j)) sign = -sign;
            y ^= uint64_t(1) << *j;
            total += psi[y] * sign * g.evaluate(cy_d.as_u64());
        }
    }

    double scale = std::pow(2.0, 0.5 * n - 1.5 * k);
    if (b.dot(d)) scale = -scale;
    return scale * total;
}

// Smallest k with 2^{2k} >= 2^16 * 2^n * eps^-2 (lower edge of Eq. choosek).
inline int choose_affine_k(int n, double eps) {
    const double rhs = 16.0 + n - 2.0 * std::log2(eps);
    int k = std::max(1, int(std::ceil(rhs / 2.0 - 1e-12)));
    while (2.0 * k < rhs) ++k;
    while (k > 1 && 2.0 * (k - 1) >= rhs) --k;
    return k;
}

enum class PhiMethod { exact, affine, naive_sample };

struct ForrelationEstimate {
    double value = 0;
    double epsilon = 0;
    uint64_t queries_used = 0;
    PhiMethod method = PhiMethod::exact;
    int k = 0;  // affine dimension when method == affine
};

// Randomized forrelation estimation: additive error <= eps with probability
// >= 99%. Falls back to the exact O(n 2^n) evaluation when eps <= 2^{-n/2}
// or when the required affine dimension reaches n.
inline ForrelationEstimate phi_estimate(const BooleanOracle& f, const BooleanOracle& g,
                                        double eps, RngStream& rng, int cap = 24) {
    if (eps <= 0) throw std::invalid_argument("phi_estimate: epsilon must be positive");
    const int n = f.n();
    ForrelationEstimate est;
    est.epsilon = eps;
    uint64_t q0 = f.queries() + g.queries();
    int k = choose_affine_k(n, eps);
    if (eps <= std::pow(2.0, -0.5 * n) || k >= n) {
        est.method = PhiMethod::exact;
        est.k = n;
        est.value = phi_exact(f, g, cap);
    } else {
        est.method = PhiMethod::affine;
        est.k = k;
        AffineSubspace s = sample_affine_subspace(n, k, rng);
        AffineSubspace t = sample_affine_subspace(n, k, rng);
        est.value = mu_affine(f, g, s, t);
    }
    est.queries_used = f.queries() + g.queries() - q0;
    return est;
}

// Aaronson's sample forrelation over explicit sample lists.
inline double phi_naive_sample_explicit(const BooleanOracle& f, const BooleanOracle& g,
                                        const std::vector<uint64_t>& xs,
                                        const std::vector<uint64_t>& ys) {
    const size_t l = xs.size();
    if (ys.size() != l || l == 0) throw std::invalid_argument("phi_naive_sample: need equal nonzero sample counts");
    std::vector<int> fx(l), gy(l);
    for (size_t i = 0; i < l; ++i) fx[i] = f.evaluate(xs[i]);
    for (size_t j = 0; j < l; ++j) gy[j] = g.evaluate(ys[j]);
    double sum = 0;
    for (size_t i = 0; i < l; ++i)
        for (size_t j = 0; j < l; ++j)
            sum += fx[i] * gy[j] * (__builtin_parityll(xs[i] & ys[j]) ? -1 : 1);
    return sum * std::pow(2.0, 0.5 * f.n()) / (double(l) * double(l));
}

inline double phi_naive_sample(const BooleanOracle& f, const BooleanOracle& g,
                               uint64_t l, RngStream& rng) {
    const uint64_t space = uint64_t(1) << f.n();
    std::vector<uint64_t> xs(l), ys(l);
    for (auto& x : xs) x = rng.index(space);
    for (auto& y : ys) y = rng.index(space);
    return phi_naive_sample_explicit(f, g, xs, ys);
}

}  // namespace forr
