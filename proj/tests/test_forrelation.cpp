#include <catch2/catch_amalgamated.hpp>

#include <map>
#include <numeric>
#include <set>

#include "brute.hpp"
#include "forr/forrelation.hpp"

using namespace forr;

TEST_CASE("phi_exact closed forms") {
    ConstOracle f2(2, 1), g2(2, 1);
    CHECK(phi_exact(f2, g2) == Catch::Approx(0.5).margin(1e-12));

    ParityOracle f3(3, 0b001), g3(3, 0b001);
    CHECK(phi_exact(f3, g3) == Catch::Approx(-std::pow(2.0, -1.5)).margin(1e-12));
}

TEST_CASE("phi_exact matches the definitional double sum") {
    RngStream rng(101);
    for (int trial = 0; trial < 5; ++trial) {
        auto f = random_table_oracle(4, rng);
        auto g = random_table_oracle(4, rng);
        double fast = phi_exact(*f, *g);
        double slow = brute::phi_double_sum(*f, *g);
        CHECK(fast == Catch::Approx(slow).margin(1e-10));
        CHECK(std::abs(fast) <= 1.0 + 1e-9);
    }
}

TEST_CASE("phi_exact query accounting and cap") {
    ConstOracle f(4, 1), g(4, 1);
    phi_exact(f, g);
    CHECK(f.queries() == 16);
    CHECK(g.queries() == 16);
    ConstOracle big(25, 1);
    CHECK_THROWS_AS(phi_exact(big, big), std::invalid_argument);
}

TEST_CASE("sample_affine_subspace invariants") {
    RngStream rng(7);
    SECTION("k=n covers the full space") {
        for (int trial = 0; trial < 3; ++trial) {
            AffineSubspace s = sample_affine_subspace(4, 4, rng);
            auto pts = enumerate_coset(s);
            CHECK(std::set<uint64_t>(pts.begin(), pts.end()).size() == 16);
        }
    }
    SECTION("every draw enumerates 2^k distinct strings") {
        for (int trial = 0; trial < 20; ++trial) {
            AffineSubspace s = sample_affine_subspace(6, 3, rng);
            auto pts = enumerate_coset(s);
            CHECK(std::set<uint64_t>(pts.begin(), pts.end()).size() == 8);
        }
    }
    SECTION("rejects k > n") {
        CHECK_THROWS_AS(sample_affine_subspace(3, 4, rng), std::invalid_argument);
    }
}

TEST_CASE("affine subspace sampling is uniform over 1-dim cosets of F2^3") {
    RngStream rng(8);
    // canonical form: (direction vector, smaller offset representative)
    std::map<std::pair<uint64_t, uint64_t>, int> counts;
    const int draws = 28 * 250;
    for (int i = 0; i < draws; ++i) {
        AffineSubspace s = sample_affine_subspace(3, 1, rng);
        auto pts = enumerate_coset(s);
        uint64_t dir = pts[0] ^ pts[1];
        uint64_t rep = std::min(pts[0], pts[1]);
        ++counts[{dir, rep}];
    }
    REQUIRE(counts.size() == 28);
    const double p = 1.0 / 28.0;
    const double sigma = std::sqrt(p * (1 - p) * draws);
    for (const auto& [key, c] : counts)
        CHECK(std::abs(c - draws * p) <= 3.5 * sigma);
}

TEST_CASE("mu_affine equals phi_exact when S=T=F2^n") {
    RngStream rng(9);
    const int n = 5;
    auto f = random_table_oracle(n, rng);
    auto g = random_table_oracle(n, rng);
    AffineSubspace s = sample_affine_subspace(n, n, rng);
    AffineSubspace t = sample_affine_subspace(n, n, rng);
    CHECK(mu_affine(*f, *g, s, t) == Catch::Approx(phi_exact(*f, *g)).margin(1e-10));
}

TEST_CASE("mu_affine pipeline matches the 4^k double-sum oracle") {
    RngStream rng(10);
    SECTION("constant functions") {
        ConstOracle f(6, 1), g(6, 1);
        for (int trial = 0; trial < 5; ++trial) {
            AffineSubspace s = sample_affine_subspace(6, 3, rng);
            AffineSubspace t = sample_affine_subspace(6, 3, rng);
            CHECK(mu_affine(f, g, s, t) == Catch::Approx(brute::mu_double_sum(f, g, s, t)).margin(1e-10));
        }
    }
    SECTION("random functions") {
        auto f = random_table_oracle(6, rng);
        auto g = random_table_oracle(6, rng);
        for (int trial = 0; trial < 10; ++trial) {
            AffineSubspace s = sample_affine_subspace(6, 3, rng);
            AffineSubspace t = sample_affine_subspace(6, 3, rng);
            CHECK(mu_affine(*f, *g, s, t) == Catch::Approx(brute::mu_double_sum(*f, *g, s, t)).margin(1e-10));
        }
    }
}

TEST_CASE("mu_affine query accounting") {
    RngStream rng(30);
    ConstOracle f(6, 1), g(6, 1);
    AffineSubspace s = sample_affine_subspace(6, 4, rng);
    AffineSubspace t = sample_affine_subspace(6, 4, rng);
    f.reset_queries();
    g.reset_queries();
    mu_affine(f, g, s, t);
    CHECK(f.queries() == 16);
    CHECK(g.queries() == 16);
}

TEST_CASE("mu_affine invariant under coset re-parameterization") {
    RngStream rng(31);
    const int n = 6, k = 3;
    auto f = random_table_oracle(n, rng);
    auto g = random_table_oracle(n, rng);
    AffineSubspace s = sample_affine_subspace(n, k, rng);
    AffineSubspace t = sample_affine_subspace(n, k, rng);
    double base = mu_affine(*f, *g, s, t);
    for (int trial = 0; trial < 5; ++trial) {
        BitMatrix gmat(k, k);
        do {
            for (int i = 0; i < k; ++i)
                for (int j = 0; j < k; ++j) gmat.set(i, j, rng.bit());
        } while (gf2_rank(gmat) != k);
        AffineSubspace s2 = s;
        s2.a = gf2_matmul(s.a, gmat);
        auto p1 = enumerate_coset(s);
        auto p2 = enumerate_coset(s2);
        REQUIRE(std::set<uint64_t>(p1.begin(), p1.end()) == std::set<uint64_t>(p2.begin(), p2.end()));
        CHECK(mu_affine(*f, *g, s2, t) == Catch::Approx(base).margin(1e-10));
    }
}

TEST_CASE("choose_affine_k picks the smallest admissible k") {
    for (int n : {4, 8, 12, 16}) {
        for (double eps : {0.5, 0.3, 0.1, 0.05}) {
            int k = choose_affine_k(n, eps);
            auto ok = [&](int kk) { return std::pow(2.0, 2.0 * kk) >= std::pow(2.0, 16) * std::pow(2.0, n) / (eps * eps) - 1e-6; };
            CHECK(ok(k));
            if (k > 1) CHECK(!ok(k - 1));
        }
    }
}

TEST_CASE("phi_estimate delegates to exact for small epsilon") {
    RngStream rng(32);
    const int n = 6;
    auto f = random_table_oracle(n, rng);
    auto g = random_table_oracle(n, rng);
    double eps = std::pow(2.0, -0.5 * n) / 2;
    auto est = phi_estimate(*f, *g, eps, rng);
    CHECK(est.method == PhiMethod::exact);
    CHECK(est.value == Catch::Approx(phi_exact(*f, *g)).margin(1e-12));
    CHECK_THROWS_AS(phi_estimate(*f, *g, 0.0, rng), std::invalid_argument);
}

TEST_CASE("phi_estimate query accounting per branch") {
    RngStream rng(33);
    const int n = 20;  // large n so a loose epsilon stays in the affine branch
    HashOracle f(n, 5), g(n, 6);
    double eps = 0.9;
    int k = choose_affine_k(n, eps);
    REQUIRE(k < n);
    f.reset_queries();
    g.reset_queries();
    auto est = phi_estimate(f, g, eps, rng);
    CHECK(est.method == PhiMethod::affine);
    CHECK(est.k == k);
    CHECK(est.queries_used == (uint64_t(2) << k));

    HashOracle f2(8, 7), g2(8, 8);
    auto est2 = phi_estimate(f2, g2, 0.3, rng);
    CHECK(est2.method == PhiMethod::exact);
    CHECK(est2.queries_used == (uint64_t(2) << 8));
}

TEST_CASE("mu_affine sample mean converges to phi (Claim 1 unbiasedness)") {
    RngStream rng(34);
    const int n = 6, k = 3, runs = 2000;
    auto f = random_table_oracle(n, rng);
    auto g = random_table_oracle(n, rng);
    double phi = phi_exact(*f, *g);
    std::vector<double> samples(runs);
    brute::RunningStats stats;
    for (int i = 0; i < runs; ++i) {
        AffineSubspace s = sample_affine_subspace(n, k, rng);
        AffineSubspace t = sample_affine_subspace(n, k, rng);
        samples[i] = mu_affine(*f, *g, s, t);
        stats.add(samples[i]);
    }
    CHECK(std::abs(stats.mean() - phi) <= 4.0 / std::sqrt(double(runs)));
    // Claim 1 variance bound, with the standard error of the sample variance
    double var = stats.variance();
    double m4 = 0;
    for (double x : samples) m4 += std::pow(x - stats.mean(), 4);
    m4 /= runs;
    double var_se = std::sqrt(std::max(0.0, m4 - var * var) / runs);
    double bound = std::pow(2.0, n - 2 * k) + 2.0 * std::pow(2.0, -k);
    CHECK(var <= bound + 3 * var_se);
}

TEST_CASE("phi_naive_sample") {
    RngStream rng(35);
    SECTION("full enumeration recovers phi exactly") {
        const int n = 4;
        auto f = random_table_oracle(n, rng);
        auto g = random_table_oracle(n, rng);
        std::vector<uint64_t> all(16);
        std::iota(all.begin(), all.end(), 0);
        CHECK(phi_naive_sample_explicit(*f, *g, all, all) ==
              Catch::Approx(phi_exact(*f, *g)).margin(1e-12));
    }
    SECTION("unbiased for constant functions") {
        const int n = 4;
        ConstOracle f(n, 1), g(n, 1);
        brute::RunningStats stats;
        for (int i = 0; i < 10000; ++i) stats.add(phi_naive_sample(f, g, 8, rng));
        CHECK(std::abs(stats.mean() - 0.25) <= 3 * stats.sem());
    }
    SECTION("unbiased for random functions") {
        const int n = 6;
        auto f = random_table_oracle(n, rng);
        auto g = random_table_oracle(n, rng);
        double phi = phi_exact(*f, *g);
        brute::RunningStats stats;
        for (int i = 0; i < 10000; ++i) stats.add(phi_naive_sample(*f, *g, 64, rng));
        CHECK(std::abs(stats.mean() - phi) <= 3 * stats.sem());
    }
}
