#pragma once

#include <chrono>
#include <map>
#include <string>

#include "forr/qaoa.hpp"

namespace forr {

// Exhaustive maximization of the Ising cost by Gray-code search with
// incremental cost updates.
inline std::pair<std::vector<int8_t>, double> exact_maxcut(const IsingInstance& inst, int cap = 26) {
    const int n = inst.graph.n;
    if (n > cap) throw std::invalid_argument("exact_maxcut: instance above cap");
    if (n == 0) return {{}, inst.offset};
    auto adj = inst.graph.adjacency();
    std::vector<int8_t> z(n, 1), best(n, 1);
    double cur = inst.cost(z);
    double best_cost = cur;
    GrayCode gray(n);
    while (auto p = gray.advance()) {
        double local = inst.field_of(*p);
        for (int q : adj[*p]) local += inst.coupling[inst.graph.edge_index(*p, q)] * z[q];
        cur -= 2.0 * z[*p] * local;
        z[*p] = -z[*p];
        if (cur > best_cost) {
            best_cost = cur;
            best = z;
        }
    }
    return {best, best_cost};
}

struct RqaoaOptions {
    double epsilon = 0.03;
    int brute_threshold = 10;
    int gamma_grid = 30;
    int level1_grid = 48;
    double cutoff_seconds = 0.1;
    SamplerKind sampler = SamplerKind::linear;
    int jobs = 1;
    // per-instance forrelation samples; 0 selects ceil(1/eps^2) as in the
    // reported experiments
    uint64_t samples_override = 0;
};

struct RqaoaStep {
    int step = 0;
    int vertices = 0;
    int edge_u = -1, edge_v = -1;  // original labels (u eliminated into v)
    int sign = 1;
    double m_value = 0;
    bool tie_break = false;
    Angles angles;
    int method_counts[4] = {0, 0, 0, 0};  // statevector, A', A'', forrelation
    long forrelation_calls = 0;
    double wall_seconds = 0;
};

struct RqaoaResult {
    std::vector<int8_t> assignment;  // per original vertex, +-1
    double cost = 0;
    std::vector<RqaoaStep> trace;
};

namespace detail {

// level-1 energy (beta2 = gamma2 = 0) is exact on radius-1 lightcones
inline double level1_energy(const IsingInstance& inst, double beta1, double gamma1) {
    double sum = inst.offset;
    Angles a{beta1, 0, gamma1, 0};
    for (size_t e = 0; e < inst.graph.edges.size(); ++e) {
        auto [s, t] = inst.graph.edges[e];
        sum += inst.coupling[e] * zz_mean_statevector(inst, s, t, a, 26, 1);
    }
    return sum;
}

}  // namespace detail

// Recursive QAOA driver: per step optimize (beta1, gamma1) at level 1 on a
// grid, then gamma2 on a grid with beta2 analytic, measure all edge means,
// contract the strongest correlation with its sign, and recurse. The
// remainder below the threshold is solved exactly and back-substituted.
inline RqaoaResult rqaoa(const IsingInstance& input, const RqaoaOptions& opt, RngStream& rng) {
    if (opt.brute_threshold > 26) throw std::invalid_argument("rqaoa: brute threshold above cap");
    IsingInstance cur = input;
    std::vector<int> label(cur.graph.n);  // current vertex -> original vertex
    for (int v = 0; v < cur.graph.n; ++v) label[v] = v;
    struct Constraint { int eliminated, survivor, sign; };
    std::vector<Constraint> stack;
    RqaoaResult result;

    MeanOptions mopt;
    mopt.epsilon = opt.epsilon;
    mopt.sampler = opt.sampler;
    mopt.jobs = 1;
    mopt.cutoff_seconds = opt.cutoff_seconds;
    mopt.samples_override = opt.samples_override ? opt.samples_override
                                                 : uint64_t(std::ceil(1.0 / (opt.epsilon * opt.epsilon)));

    int step_idx = 0;
    while (cur.graph.n > opt.brute_threshold && !cur.graph.edges.empty()) {
        auto t0 = std::chrono::steady_clock::now();
        RqaoaStep step;
        step.step = step_idx++;
        step.vertices = cur.graph.n;

        // phase 1: level-1 angles on a grid
        double best_e1 = -1e300, b1 = 0, g1 = 0;
        for (int i = 0; i < opt.level1_grid; ++i)
            for (int j = 0; j < opt.level1_grid; ++j) {
                double beta1 = M_PI * i / opt.level1_grid;
                double gamma1 = 2 * M_PI * j / opt.level1_grid;
                double e = detail::level1_energy(cur, beta1, gamma1);
                if (e > best_e1) { best_e1 = e; b1 = beta1; g1 = gamma1; }
            }

        // phase 2: gamma2 grid with the analytic beta2 maximizer
        double best_e2 = -1e300, b2 = 0, g2 = 0;
        for (int k = 0; k < opt.gamma_grid; ++k) {
            double gamma2 = 2 * M_PI * k / opt.gamma_grid;
            Beta2Fit fit = optimize_beta2(cur, b1, g1, gamma2, mopt, rng);
            if (fit.emax > best_e2) { best_e2 = fit.emax; b2 = fit.beta2; g2 = gamma2; }
        }
        step.angles = Angles{b1, b2, g1, g2};

        // phase 3: edge means at the chosen angles
        const size_t ne = cur.graph.edges.size();
        std::vector<EdgeMeanReport> reps(ne);
        uint64_t master = rng.u64();
        parallel_for(opt.jobs, ne, [&](size_t e) {
            auto [s, t] = cur.graph.edges[e];
            RngStream stream = RngStream::derive(master, "rqaoa-edge", uint64_t(step.step), e);
            MeanOptions local = mopt;
            reps[e] = zz_mean_auto(cur, s, t, step.angles, local, stream);
        });
        size_t chosen = 0;
        for (size_t e = 0; e < ne; ++e) {
            ++step.method_counts[int(reps[e].method)];
            step.forrelation_calls += reps[e].forrelation_calls;
            if (std::abs(reps[e].value) > std::abs(reps[chosen].value)) chosen = e;
        }
        auto [p, q] = cur.graph.edges[chosen];
        double m = reps[chosen].value;
        int sign = m >= 0 ? 1 : -1;
        if (m == 0) step.tie_break = true;
        step.edge_u = label[p];
        step.edge_v = label[q];
        step.sign = sign;
        step.m_value = m;

        // phase 4: contract p into q with the sign constraint z_p = sign z_q
        stack.push_back({label[p], label[q], sign});
        auto contracted = contract_edge(cur.graph, q, p);  // keep q, remove p
        IsingInstance next = IsingInstance::on(Graph(contracted.graph.n));
        next.graph.rotation = contracted.graph.rotation;
        next.graph.outer_face = contracted.graph.outer_face;
        next.offset = cur.offset;
        next.field.assign(contracted.graph.n, 0.0);
        std::vector<std::map<int, double>> acc(contracted.graph.n);
        for (size_t e = 0; e < cur.graph.edges.size(); ++e) {
            auto [u, v] = cur.graph.edges[e];
            double j = cur.coupling[e];
            if (u == p) j *= sign;
            if (v == p) j *= sign;
            int nu = contracted.vertex_map[u], nv = contracted.vertex_map[v];
            if (nu == nv) {
                next.offset += j;  // the contracted edge itself
                continue;
            }
            if (nu > nv) std::swap(nu, nv);
            acc[nu][nv] += j;
        }
        for (int v = 0; v < cur.graph.n; ++v) {
            double h = cur.field_of(v) * (v == p ? sign : 1);
            next.field[contracted.vertex_map[v]] += h;
        }
        for (int u = 0; u < contracted.graph.n; ++u)
            for (auto [v, j] : acc[u])
                if (j != 0) next.graph.add_edge(u, v);
        next.coupling.assign(next.graph.edges.size(), 0.0);
        for (int u = 0; u < contracted.graph.n; ++u)
            for (auto [v, j] : acc[u])
                if (j != 0) next.coupling[next.graph.edge_index(u, v)] = j;
        // drop rotation/outer when they reference missing edges
        if (next.graph.rotation) {
            bool ok = true;
            for (int v = 0; v < next.graph.n && ok; ++v)
                for (int w : (*next.graph.rotation)[v])
                    if (!next.graph.has_edge(v, w)) { ok = false; break; }
            if (!ok) {
                next.graph.rotation.reset();
                next.graph.outer_face.reset();
            }
        }

        std::vector<int> new_label(contracted.graph.n);
        for (int v = 0; v < cur.graph.n; ++v)
            if (v != p) new_label[contracted.vertex_map[v]] = label[v];
        label = std::move(new_label);
        cur = std::move(next);

        step.wall_seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        result.trace.push_back(step);
    }

    // exhaustive tail; a field-only remainder is separable
    std::vector<int8_t> tail;
    if (cur.graph.edges.empty() && cur.graph.n > opt.brute_threshold) {
        tail.assign(cur.graph.n, 1);
        for (int v = 0; v < cur.graph.n; ++v)
            if (cur.field_of(v) < 0) tail[v] = -1;
    } else {
        tail = exact_maxcut(cur, 26).first;
    }
    result.assignment.assign(input.graph.n, 0);
    for (int v = 0; v < cur.graph.n; ++v) result.assignment[label[v]] = tail[v];
    for (auto it = stack.rbegin(); it != stack.rend(); ++it)
        result.assignment[it->eliminated] = int8_t(it->sign * result.assignment[it->survivor]);
    result.cost = input.cost(result.assignment);
    return result;
}

}  // namespace forr
