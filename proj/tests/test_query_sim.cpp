#include <catch2/catch_amalgamated.hpp>

#include <map>

#include "brute.hpp"
#include "forr/forrelation.hpp"
#include "forr/query_sim.hpp"

using namespace forr;

namespace {

// dense matrix-chain evaluation of Eq. p2
cplx chain_oracle(const QueryCircuit& c) {
    const size_t dim = size_t(1) << c.m;
    const size_t mask = (size_t(1) << c.n) - 1;
    auto op_matrix = [&](const QubitOperator& op) {
        std::vector<cplx> m(dim * dim, cplx(0));
        for (size_t col = 0; col < dim; ++col) {
            cvec e(dim, cplx(0));
            e[col] = 1;
            op.apply(e, c.m, false);
            for (size_t row = 0; row < dim; ++row) m[row * dim + col] = e[row];
        }
        return m;
    };
    auto matmul = [&](const std::vector<cplx>& a, const std::vector<cplx>& b) {
        std::vector<cplx> out(dim * dim, cplx(0));
        for (size_t i = 0; i < dim; ++i)
            for (size_t l = 0; l < dim; ++l)
                for (size_t j = 0; j < dim; ++j)
                    out[i * dim + j] += a[i * dim + l] * b[l * dim + j];
        return out;
    };
    std::vector<cplx> acc = op_matrix(c.ops[0]);
    for (int j = 0; j < c.k(); ++j) {
        std::vector<cplx> diag(dim * dim, cplx(0));
        for (size_t i = 0; i < dim; ++i) diag[i * dim + i] = double(c.oracles[j]->evaluate(i & mask));
        acc = matmul(acc, diag);
        acc = matmul(acc, op_matrix(c.ops[j + 1]));
    }
    return acc[0];
}

}  // namespace

TEST_CASE("amplitude_exact trivial circuits") {
    ConstOracle f(3, 1);
    QueryCircuit c;
    c.m = c.n = 3;
    c.oracles = {&f, &f};
    c.ops.assign(3, QubitOperator::identity());
    CHECK(std::abs(amplitude_exact(c) - cplx(1, 0)) < 1e-12);
}

TEST_CASE("kfold of constant +1 oracles telescopes") {
    const int n = 4;
    ConstOracle f(n, 1);
    for (int k = 2; k <= 5; ++k) {
        std::vector<const BooleanOracle*> fs(k, &f);
        cplx q = kfold_phi_exact(fs);
        double expect = (k % 2 == 0) ? std::pow(2.0, -0.5 * n) : 1.0;
        CHECK(std::abs(q - cplx(expect, 0)) < 1e-12);
    }
}

TEST_CASE("kfold k=2 agrees with phi_exact") {
    RngStream rng(21);
    auto f = random_table_oracle(6, rng);
    auto g = random_table_oracle(6, rng);
    std::vector<const BooleanOracle*> fs{f.get(), g.get()};
    CHECK(std::abs(kfold_phi_exact(fs) - cplx(phi_exact(*f, *g), 0)) < 1e-10);
}

TEST_CASE("amplitude_exact matches dense matrix-chain product") {
    RngStream rng(22);
    const int m = 3;
    auto f1 = random_table_oracle(m, rng);
    auto f2 = random_table_oracle(m, rng);
    QueryCircuit c;
    c.m = c.n = m;
    c.oracles = {f1.get(), f2.get()};
    // random diagonal-phase operators
    for (int j = 0; j < 3; ++j) {
        std::vector<cplx> d(8 * 8, cplx(0));
        for (int i = 0; i < 8; ++i) d[i * 8 + i] = std::polar(1.0, rng.uniform(0, 2 * M_PI));
        c.ops.push_back(QubitOperator::from_dense(std::move(d)));
    }
    CHECK(std::abs(amplitude_exact(c) - chain_oracle(c)) < 1e-10);
}

TEST_CASE("structured hadamard agrees with its dense form") {
    RngStream rng(23);
    const int m = 3;
    const size_t dim = 8;
    std::vector<cplx> h(dim * dim);
    for (size_t r = 0; r < dim; ++r)
        for (size_t cidx = 0; cidx < dim; ++cidx)
            h[r * dim + cidx] = std::pow(2.0, -1.5) * (__builtin_parityll(r & cidx) ? -1.0 : 1.0);
    auto f1 = random_table_oracle(m, rng);
    auto f2 = random_table_oracle(m, rng);
    QueryCircuit structured, dense;
    structured.m = structured.n = dense.m = dense.n = m;
    structured.oracles = dense.oracles = {f1.get(), f2.get()};
    structured.ops.assign(3, QubitOperator::hadamard_all());
    dense.ops.assign(3, QubitOperator::from_dense(h));
    CHECK(std::abs(amplitude_exact(structured) - amplitude_exact(dense)) < 1e-10);
}

TEST_CASE("operator norm validation") {
    ConstOracle f(2, 1);
    QueryCircuit c;
    c.m = c.n = 2;
    c.oracles = {&f};
    std::vector<cplx> big(16, cplx(0));
    for (int i = 0; i < 4; ++i) big[i * 4 + i] = 2.0;
    c.ops = {QubitOperator::from_dense(big), QubitOperator::identity()};
    CHECK_THROWS_AS(amplitude_exact(c), std::invalid_argument);
}

TEST_CASE("sample_projection") {
    RngStream rng(24);
    SECTION("computational basis state is deterministic") {
        cvec alpha(1 << 5, cplx(0));
        alpha[0] = 1;
        for (int i = 0; i < 50; ++i) CHECK(sample_projection(alpha, 3, rng) == 0);
    }
    SECTION("uniform superposition gives uniform marginals") {
        const int m = 5, n = 3;
        cvec alpha(1 << m, cplx(1.0, 0.0));
        const int draws = 100000;
        std::vector<int> counts(1 << n, 0);
        for (int i = 0; i < draws; ++i) ++counts[sample_projection(alpha, n, rng)];
        double chi2 = 0, expect = draws / 8.0;
        for (int z = 0; z < 8; ++z) chi2 += (counts[z] - expect) * (counts[z] - expect) / expect;
        CHECK(chi2 < 24.3);  // chi^2_{7} at p=0.001
    }
    SECTION("random state matches direct marginal computation") {
        const int m = 5, n = 3;
        cvec alpha(1 << m);
        for (auto& z : alpha) z = cplx(rng.uniform(-1, 1), rng.uniform(-1, 1));
        std::vector<double> p(1 << n, 0.0);
        double total = 0;
        for (size_t i = 0; i < alpha.size(); ++i) { p[i & 7] += std::norm(alpha[i]); total += std::norm(alpha[i]); }
        for (auto& x : p) x /= total;
        const int draws = 100000;
        std::vector<int> counts(1 << n, 0);
        for (int i = 0; i < draws; ++i) ++counts[sample_projection(alpha, n, rng)];
        double tv = 0;
        for (int z = 0; z < 8; ++z) tv += std::abs(counts[z] / double(draws) - p[z]);
        CHECK(tv / 2 < 0.02);
    }
    SECTION("zero vector errors") {
        cvec zero(8, cplx(0));
        CHECK_THROWS(sample_projection(zero, 2, rng));
    }
}

TEST_CASE("amplitude_estimate exact branch when budget covers all queries") {
    RngStream rng(25);
    auto f = random_table_oracle(4, rng);
    auto g = random_table_oracle(4, rng);
    std::vector<const BooleanOracle*> fs{f.get(), g.get()};
    auto est = kfold_phi(fs, {.epsilon = 0.3}, rng);
    CHECK(est.exact_branch);
    CHECK(est.value == kfold_phi_exact(fs));
    CHECK(est.queries_used == 2ull << 4);
}

TEST_CASE("amplitude_estimate sampling branch query accounting") {
    RngStream rng(26);
    auto f = random_table_oracle(5, rng);
    auto g = random_table_oracle(5, rng);
    std::vector<const BooleanOracle*> fs{f.get(), g.get()};
    f->reset_queries();
    g->reset_queries();
    auto est = kfold_phi(fs, {.epsilon = 0.3, .samples_override = 100}, rng);
    CHECK(!est.exact_branch);
    CHECK(est.samples_per_level == 100);
    CHECK(f->queries() == 100);
    CHECK(g->queries() == 100);
}

TEST_CASE("amplitude_estimate annihilation flag") {
    ConstOracle f(2, 1);
    QueryCircuit c;
    c.m = c.n = 2;
    c.oracles = {&f};
    c.ops = {QubitOperator::from_dense(std::vector<cplx>(16, cplx(0))), QubitOperator::identity()};
    RngStream rng(27);
    auto est = amplitude_estimate(c, {.epsilon = 0.5, .samples_override = 10}, rng);
    CHECK(est.annihilated);
    CHECK(est.value == cplx(0, 0));
}

TEST_CASE("sampled estimator is unbiased and obeys the Lemma 1 bound") {
    RngStream rng(28);
    const int n = 5, k = 2, runs = 400;
    auto f = random_table_oracle(n, rng);
    auto g = random_table_oracle(n, rng);
    std::vector<const BooleanOracle*> fs{f.get(), g.get()};
    cplx q = kfold_phi_exact(fs);
    const uint64_t l = 48;
    brute::RunningStats re, norm_sq;
    for (int i = 0; i < runs; ++i) {
        auto est = kfold_phi(fs, {.epsilon = 1.0, .samples_override = l}, rng);
        re.add(est.value.real());
        norm_sq.add(std::norm(est.value));
    }
    CHECK(std::abs(re.mean() - q.real()) <= 3.5 * re.sem());
    // E|X_k|^2 - |q|^2 <= 2^{n(k-1)} L^-k (1 + L/2^n)^k
    double bound = std::pow(2.0, n * (k - 1)) * std::pow(double(l), -k) *
                   std::pow(1.0 + double(l) / (1 << n), k);
    CHECK(norm_sq.mean() - std::norm(q) <= bound + 3 * norm_sq.sem());
}

TEST_CASE("query probability wrapper matches direct simulation") {
    RngStream rng(29);
    const int m = 3, t = 2;
    auto f1 = random_table_oracle(m, rng);
    auto f2 = random_table_oracle(m, rng);
    std::vector<QubitOperator> v{
        QubitOperator::hadamard_all(),
        QubitOperator::single(1, {cplx(std::cos(0.7)), cplx(0, std::sin(0.7)),
                                  cplx(0, std::sin(0.7)), cplx(std::cos(0.7))}),
        QubitOperator::hadamard_all()};
    auto c = make_query_probability_circuit(m, m, v, {f1.get(), f2.get()}, 2);
    cplx p = amplitude_exact(c);
    CHECK(std::abs(p.imag()) < 1e-10);
    CHECK(p.real() >= -1e-10);
    CHECK(p.real() <= 1 + 1e-10);

    // direct: || P_1 V2 U2 V1 U1 V0 |0> ||^2
    cvec state(8, cplx(0));
    state[0] = 1;
    v[0].apply(state, m, false);
    for (size_t i = 0; i < 8; ++i) state[i] *= double(f1->evaluate(i));
    v[1].apply(state, m, false);
    for (size_t i = 0; i < 8; ++i) state[i] *= double(f2->evaluate(i));
    v[2].apply(state, m, false);
    double direct = 0;
    for (size_t i = 0; i < 8; ++i)
        if ((i >> 2) & 1) direct += std::norm(state[i]);
    CHECK(p.real() == Catch::Approx(direct).margin(1e-10));
}

TEST_CASE("level norm growth obeys the expectation bound") {
    RngStream rng(30);
    const int n = 5, k = 3, runs = 300;
    std::vector<std::unique_ptr<BooleanOracle>> owned;
    std::vector<const BooleanOracle*> oracles;
    for (int j = 0; j < k; ++j) {
        owned.push_back(random_table_oracle(n, rng));
        oracles.push_back(owned.back().get());
    }
    const uint64_t l = 32;
    std::vector<brute::RunningStats> norms(k);
    for (int i = 0; i < runs; ++i) {
        auto est = kfold_phi(oracles, {.epsilon = 1.0, .samples_override = l}, rng);
        REQUIRE(est.level_norms.size() == size_t(k));
        for (int j = 0; j < k; ++j) norms[j].add(est.level_norms[j]);
    }
    double growth = 1.0 + double(1 << n) / double(l);
    double prev_mean = 1.0;  // |phi_0|^2
    for (int j = 0; j < k; ++j) {
        CHECK(norms[j].mean() <= growth * prev_mean + 3 * norms[j].sem());
        prev_mean = norms[j].mean();
    }
}
