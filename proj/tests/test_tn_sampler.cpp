#include <catch2/catch_amalgamated.hpp>

#include "forr/rng.hpp"
#include <chrono>

#include "forr/tn_sampler.hpp"

using namespace forr;

namespace {

// dense d^n x d^n evaluation of O U chi U^dag O^dag
struct DenseSystem {
    int n, d;
    size_t dim;
    std::vector<cplx> udiag;  // product of gate diagonals over the full space
    std::vector<cplx> chi;    // dense matrix
    std::vector<cplx> o;      // dense matrix

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

    // N = O U chi U^dag O^dag
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

QuditSystem random_system(int n, int d, RngStream& rng, bool unitary_gates = false,
                          bool random_ops = true) {
    QuditSystem sys = QuditSystem::make(n, d);
    for (int i = 0; i < n; ++i) {
        // random pure-ish density matrix: mixture of two random pure states
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
                sys.chi[i][a * d + b] = w * v1[a] * std::conj(v1[b]) / n1 +
                                        (1 - w) * v2[a] * std::conj(v2[b]) / n2;
    }
    int gates = 2 * n;
    for (int k = 0; k < gates; ++k) {
        DiagonalGate g;
        int arity = 1 + int(rng.index(2));
        std::set<int> sup;
        while (int(sup.size()) < arity) sup.insert(int(rng.index(n)));
        g.support.assign(sup.begin(), sup.end());
        size_t dim = 1;
        for (int i = 0; i < arity; ++i) dim *= d;
        for (size_t i = 0; i < dim; ++i)
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

TreeDecomposition decomposition_for(const QuditSystem& sys) { return minfill_td(sys.connectivity()); }

}  // namespace

TEST_CASE("merge tensor properties") {
    RngStream rng(61);
    const int d = 3;
    std::vector<cplx> chi(d * d);
    for (auto& z : chi) z = cplx(rng.uniform(-1, 1), rng.uniform(-1, 1));
    chi[4] = 0;  // exercise the mask

    SECTION("two copies merge into one") {
        auto out = merge_apply(chi, chi, chi);
        for (size_t i = 0; i < chi.size(); ++i) CHECK(std::abs(out[i] - chi[i]) < 1e-12);
    }
    SECTION("diagonal gates commute through") {
        std::vector<cplx> u(d * d), v(d * d), gate(d * d);
        for (auto& z : u) z = cplx(rng.uniform(-1, 1), rng.uniform(-1, 1));
        for (auto& z : v) z = cplx(rng.uniform(-1, 1), rng.uniform(-1, 1));
        for (auto& z : gate) z = std::polar(1.0, rng.uniform(0, 2 * M_PI));
        std::vector<cplx> gv(d * d);
        for (int i = 0; i < d * d; ++i) gv[i] = gate[i] * v[i];
        auto lhs = merge_apply(chi, u, gv);
        auto rhs = merge_apply(chi, u, v);
        for (int i = 0; i < d * d; ++i) rhs[i] *= gate[i];
        for (int i = 0; i < d * d; ++i) CHECK(std::abs(lhs[i] - rhs[i]) < 1e-12);
    }
    SECTION("off-mask entries vanish") {
        std::vector<cplx> u(d * d, cplx(1)), v(d * d, cplx(1));
        auto out = merge_apply(chi, u, v);
        CHECK(out[4] == cplx(0));
    }
}

TEST_CASE("network contracts to vec(chi) without gates or operators") {
    RngStream rng(62);
    QuditSystem sys = QuditSystem::make(3, 2);
    TreeDecomposition td;
    td.bags = {{0, 1}, {1, 2}};
    td.links = {{1}, {0}};
    auto net = build_network(sys, td);
    auto full = contract_full(net);
    DenseSystem dense(sys);
    auto m = dense.final_state();
    REQUIRE(full.quds == std::vector<int>{0, 1, 2});
    for (size_t k = 0; k < dense.dim; ++k)
        for (size_t b = 0; b < dense.dim; ++b) {
            size_t idx = 0, mul = 1;
            size_t kk = k, bb = b;
            for (int q = 0; q < 3; ++q) {
                idx += ((kk % 2) * 2 + (bb % 2)) * mul;
                mul *= 4;
                kk /= 2;
                bb /= 2;
            }
            CHECK(std::abs(full.data[idx] - m[k * dense.dim + b]) < 1e-12);
        }
}

TEST_CASE("appendix-style example: ownership and easy-qudit removal") {
    RngStream rng(63);
    // qudits a..h = 0..7, gates on the twelve listed supports
    QuditSystem sys = QuditSystem::make(8, 2);
    std::vector<std::vector<int>> supports{{0, 1}, {0, 2}, {1},    {1, 2}, {1, 4}, {1, 5},
                                           {1, 6}, {1, 7}, {2, 3, 4}, {3, 4}, {4, 6, 7}, {5, 6}};
    for (auto& sup : supports) {
        DiagonalGate g;
        g.support = sup;
        size_t dim = size_t(1) << sup.size();
        for (size_t i = 0; i < dim; ++i) g.diag.push_back(std::polar(1.0, rng.uniform(0, 2 * M_PI)));
        sys.gates.push_back(std::move(g));
    }
    // all operators nontrivial except O_h
    for (int i = 0; i < 7; ++i) sys.ops[i] = {cplx(0.6, 0.1), cplx(0.2, -0.3), cplx(-0.1, 0.4), cplx(0.5, 0)};

    auto removal = remove_easy(sys, rng);
    CHECK(removal.outcomes[7] >= 0);
    CHECK(removal.reduced.n == 7);
    // the {4,6,7} gate became a {4,6} gate in new labels (identical here)
    bool found_eg = false;
    for (const auto& g : removal.reduced.gates) found_eg |= g.support == std::vector<int>{4, 6};
    CHECK(found_eg);

    TreeDecomposition td;
    td.bags = {{0, 1, 2}, {1, 2, 4}, {2, 3, 4}, {1, 4, 6}, {1, 5, 6}};
    td.links = {{1}, {0, 2, 3}, {1}, {1, 4}, {3}};
    REQUIRE(validate_td(removal.reduced.connectivity(), td).ok());
    auto net = build_network(removal.reduced, td);
    size_t owned = 0;
    for (size_t i = 0; i < net.nodes.size(); ++i) {
        const auto& node = net.nodes[i];
        owned += node.gate_ids.size();
        for (int gid : node.gate_ids) {
            const auto& sup = removal.reduced.gates[gid].support;
            // the owner contains the support and is the highest such node
            CHECK(std::includes(node.bag.begin(), node.bag.end(), sup.begin(), sup.end()));
            if (node.parent >= 0 && !sup.empty()) {
                const auto& pb = net.nodes[node.parent].bag;
                CHECK(!std::includes(pb.begin(), pb.end(), sup.begin(), sup.end()));
            }
        }
    }
    CHECK(owned == removal.reduced.gates.size());
}

TEST_CASE("network invariant on random systems") {
    RngStream rng(64);
    for (int trial = 0; trial < 12; ++trial) {
        int d = trial % 2 == 0 ? 2 : 3;
        int n = d == 2 ? 3 + int(rng.index(3)) : 3;
        QuditSystem sys = random_system(n, d, rng);
        auto net = build_network(sys, decomposition_for(sys));
        auto full = contract_full(net);
        DenseSystem dense(sys);
        auto m = dense.final_state();
        double worst = 0;
        for (size_t k = 0; k < dense.dim; ++k)
            for (size_t b = 0; b < dense.dim; ++b) {
                size_t idx = 0, mul = 1;
                size_t kk = k, bb = b;
                for (int q = 0; q < n; ++q) {
                    idx += ((kk % d) * d + (bb % d)) * mul;
                    mul *= size_t(d) * d;
                    kk /= d;
                    bb /= d;
                }
                worst = std::max(worst, std::abs(full.data[idx] - m[k * dense.dim + b]));
            }
        CHECK(worst < 1e-9);
    }
}

TEST_CASE("sampler: product case and annihilation") {
    RngStream rng(65);
    SECTION("diagonal chi with no gates samples independently") {
        QuditSystem sys = QuditSystem::make(3, 2);
        sys.chi[0] = {cplx(0.9), 0, 0, cplx(0.1)};
        sys.chi[1] = {cplx(0.5), 0, 0, cplx(0.5)};
        sys.chi[2] = {cplx(0.2), 0, 0, cplx(0.8)};
        TreeDecomposition td;
        td.bags = {{0, 1, 2}};
        td.links = {{}};
        auto net = build_network(sys, td);
        int draws = 20000;
        std::vector<double> ones(3, 0);
        for (int i = 0; i < draws; ++i) {
            auto s = tn_sample(net, rng);
            REQUIRE(s.valid);
            for (int q = 0; q < 3; ++q) ones[q] += s.outcome[q];
        }
        CHECK(std::abs(ones[0] / draws - 0.1) < 0.01);
        CHECK(std::abs(ones[1] / draws - 0.5) < 0.015);
        CHECK(std::abs(ones[2] / draws - 0.8) < 0.015);
    }
    SECTION("zero operator reports no valid outputs") {
        QuditSystem sys = QuditSystem::make(2, 2);
        sys.ops[0] = {0, 0, 0, 0};
        TreeDecomposition td;
        td.bags = {{0, 1}};
        td.links = {{}};
        auto s = tn_sample(sys, td, rng);
        CHECK(!s.valid);
    }
}

TEST_CASE("sampler conditional products reproduce the exact distribution") {
    RngStream rng(66);
    for (int trial = 0; trial < 6; ++trial) {
        int d = trial % 2 ? 3 : 2;
        int n = d == 2 ? 5 : 3;
        QuditSystem sys = random_system(n, d, rng);
        DenseSystem dense(sys);
        auto p = dense.distribution();
        auto net = build_network(sys, decomposition_for(sys));
        for (int draw = 0; draw < 60; ++draw) {
            auto s = tn_sample(net, rng);
            REQUIRE(s.valid);
            double prob = 1;
            for (double c : s.conditionals) prob *= c;
            size_t idx = 0, mul = 1;
            for (int q = 0; q < n; ++q) { idx += size_t(s.outcome[q]) * mul; mul *= d; }
            CHECK(prob == Catch::Approx(p[idx]).margin(1e-9).epsilon(1e-7));
        }
    }
}

TEST_CASE("sampler distribution matches brute force in total variation") {
    RngStream rng(67);
    QuditSystem sys = random_system(5, 2, rng);
    DenseSystem dense(sys);
    auto p = dense.distribution();
    auto net = build_network(sys, decomposition_for(sys));
    const int draws = 40000;
    std::vector<int> counts(32, 0);
    for (int i = 0; i < draws; ++i) {
        auto s = tn_sample(net, rng);
        size_t idx = 0;
        for (int q = 0; q < 5; ++q) idx |= size_t(s.outcome[q]) << q;
        ++counts[idx];
    }
    double tv = 0;
    for (int x = 0; x < 32; ++x) tv += std::abs(counts[x] / double(draws) - p[x]);
    CHECK(tv / 2 < 0.02);
}

TEST_CASE("child traversal order does not change the distribution") {
    RngStream rng(68);
    QuditSystem sys = random_system(5, 2, rng, true);
    DenseSystem dense(sys);
    auto p = dense.distribution();
    auto net = build_network(sys, decomposition_for(sys));
    // reverse every children list: the conditional product must still match
    for (auto& node : net.nodes) std::reverse(node.children.begin(), node.children.end());
    for (int draw = 0; draw < 40; ++draw) {
        auto s = tn_sample(net, rng);
        REQUIRE(s.valid);
        double prob = 1;
        for (double c : s.conditionals) prob *= c;
        size_t idx = 0;
        for (int q = 0; q < 5; ++q) idx |= size_t(s.outcome[q]) << q;
        CHECK(prob == Catch::Approx(p[idx]).margin(1e-9).epsilon(1e-7));
    }
}

TEST_CASE("remove_easy") {
    RngStream rng(69);
    SECTION("all identity operators sample the full outcome") {
        QuditSystem sys = QuditSystem::make(4, 2);
        sys.chi[2] = {cplx(0.25), 0, 0, cplx(0.75)};
        auto removal = remove_easy(sys, rng);
        CHECK(removal.reduced.n == 0);
        for (int q = 0; q < 4; ++q) CHECK(removal.outcomes[q] >= 0);
    }
    SECTION("no identity operators leaves the system unchanged") {
        QuditSystem sys = random_system(4, 2, rng);
        auto removal = remove_easy(sys, rng);
        CHECK(removal.reduced.n == 4);
        CHECK(removal.reduced.gates.size() == sys.gates.size());
    }
    SECTION("joint distribution is preserved with unitary gates and operators") {
        // the reduction needs the gate product unitary and the surviving
        // operators unitary, as in its use for sampling |alpha>
        QuditSystem sys = random_system(5, 2, rng, true, false);
        for (int i = 0; i < 5; ++i) {
            double theta = rng.uniform(0, 2 * M_PI), alpha = rng.uniform(0, 2 * M_PI);
            double phi = rng.uniform(0, 2 * M_PI);
            cplx w = std::polar(1.0, phi);
            sys.ops[i] = {w * std::cos(theta), w * std::polar(std::sin(theta), alpha),
                          -w * std::polar(std::sin(theta), -alpha), w * std::cos(theta)};
        }
        sys.ops[1] = {1, 0, 0, 1};
        sys.ops[3] = {1, 0, 0, 1};
        DenseSystem dense(sys);
        auto p = dense.distribution();
        const int draws = 40000;
        std::vector<int> counts(32, 0);
        for (int i = 0; i < draws; ++i) {
            auto removal = remove_easy(sys, rng);
            auto net = build_network(removal.reduced, decomposition_for(removal.reduced));
            auto s = tn_sample(net, rng);
            REQUIRE(s.valid);
            size_t idx = 0;
            for (int q = 0; q < 5; ++q) {
                int out = removal.outcomes[q] >= 0 ? removal.outcomes[q]
                                                   : s.outcome[std::find(removal.old_of_new.begin(),
                                                                         removal.old_of_new.end(), q) -
                                                               removal.old_of_new.begin()];
                idx |= size_t(out) << q;
            }
            ++counts[idx];
        }
        double tv = 0;
        for (int x = 0; x < 32; ++x) tv += std::abs(counts[x] / double(draws) - p[x]);
        CHECK(tv / 2 < 0.02);
    }
}

TEST_CASE("amplitude_pure") {
    RngStream rng(70);
    SECTION("no gates, identity operators") {
        std::vector<std::vector<cplx>> chi{{cplx(0.6), cplx(0.8)}, {cplx(1), cplx(0)}};
        std::vector<std::vector<cplx>> ops{{1, 0, 0, 1}, {1, 0, 0, 1}};
        TreeDecomposition td;
        td.bags = {{0, 1}};
        td.links = {{}};
        CHECK(std::abs(amplitude_pure(chi, {}, ops, {1, 0}, td) - cplx(0.8)) < 1e-12);
    }
    SECTION("random pure system matches dense evaluation") {
        for (int trial = 0; trial < 8; ++trial) {
            const int n = 6, d = 2;
            QuditSystem sys = random_system(n, d, rng);
            // purify: chi from state vectors
            std::vector<std::vector<cplx>> vecs(n, std::vector<cplx>(d));
            for (auto& v : vecs)
                for (auto& z : v) z = cplx(rng.uniform(-1, 1), rng.uniform(-1, 1));
            for (int i = 0; i < n; ++i)
                for (int a = 0; a < d; ++a)
                    for (int b = 0; b < d; ++b) sys.chi[i][a * d + b] = vecs[i][a] * std::conj(vecs[i][b]);
            std::vector<int> x(n);
            for (auto& b : x) b = int(rng.index(d));
            auto td = decomposition_for(sys);
            cplx amp = amplitude_pure(vecs, sys.gates, sys.ops, x, td);

            // dense: <x| (x)O . diag(U) . (x)chi
            DenseSystem dense(sys);
            size_t xi = 0, mul = 1;
            for (int q = 0; q < n; ++q) { xi += size_t(x[q]) * mul; mul *= d; }
            cplx expect = 0;
            for (size_t y = 0; y < dense.dim; ++y) {
                cplx v = dense.udiag[y];
                size_t yy = y;
                for (int q = 0; q < n; ++q) { v *= vecs[q][yy % d]; yy /= d; }
                expect += dense.o[xi * dense.dim + y] * v;
            }
            CHECK(std::abs(amp - expect) < 1e-9);
        }
    }
}

TEST_CASE("sampling cost scales near-linearly at fixed width") {
    // chain-structured systems: width 1, growing n; per-draw time should
    // grow about linearly (factor-2 slack on the slope)
    RngStream rng(71);
    auto chain_system = [&](int n) {
        QuditSystem sys = QuditSystem::make(n, 2);
        for (int v = 0; v + 1 < n; ++v) {
            DiagonalGate g;
            g.support = {v, v + 1};
            for (int i = 0; i < 4; ++i) g.diag.push_back(std::polar(1.0, rng.uniform(0, 2 * M_PI)));
            sys.gates.push_back(std::move(g));
        }
        for (int v = 0; v < n; ++v) {
            sys.chi[v] = {cplx(0.5), cplx(0.5), cplx(0.5), cplx(0.5)};
            sys.ops[v] = {cplx(M_SQRT1_2), cplx(M_SQRT1_2), cplx(M_SQRT1_2), cplx(-M_SQRT1_2)};
        }
        return sys;
    };
    auto time_draws = [&](const QuditSystem& sys, int draws) {
        auto net = build_network(sys, minfill_td(sys.connectivity()));
        auto t0 = std::chrono::steady_clock::now();
        for (int i = 0; i < draws; ++i) tn_sample(net, rng);
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count() / draws;
    };
    QuditSystem small = chain_system(10), big = chain_system(40);
    time_draws(small, 50);  // warm up
    double t_small = time_draws(small, 400);
    double t_big = time_draws(big, 400);
    CHECK(t_big <= 4.0 * 2.0 * t_small);  // 4x the size, factor-2 slack
}
