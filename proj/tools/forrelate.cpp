// Command-line front end: oracle/k-fold/graph forrelation estimation, the
// tensor-network sampler, and level-2 QAOA / RQAOA drivers.

#include <CLI11.hpp>
#include <fstream>
#include <iostream>

#include "forr/forrelation.hpp"
#include "forr/io.hpp"
#include "forr/parallel.hpp"
#include "forr/qaoa.hpp"
#include "forr/query_sim.hpp"
#include "forr/rqaoa.hpp"

using namespace forr;

namespace {

struct Common {
    uint64_t seed = 0;
    int jobs = default_jobs();
    std::string out;
};

std::ofstream open_out(const std::string& path) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot open output file: " + path);
    return f;
}

std::vector<double> parse_list(const std::string& s) {
    std::vector<double> out;
    std::stringstream ss(s);
    std::string tok;
    while (std::getline(ss, tok, ',')) out.push_back(std::stod(tok));
    return out;
}

IsingInstance lattice_instance(const std::string& grid, int triangular, const std::string& graph_file,
                               uint64_t seed) {
    IsingInstance inst;
    if (!graph_file.empty()) {
        inst = load_graph_file(graph_file);
    } else if (!grid.empty()) {
        auto x = grid.find('x');
        if (x == std::string::npos) throw std::runtime_error("--grid expects RxC, e.g. 4x4");
        inst = IsingInstance::on(generate_grid(std::stoi(grid.substr(0, x)), std::stoi(grid.substr(x + 1))));
    } else if (triangular > 0) {
        inst = IsingInstance::on(generate_triangular(triangular));
    } else {
        throw std::runtime_error("provide --grid, --triangular, or --graph");
    }
    if (graph_file.empty()) {
        RngStream rng = RngStream::derive(seed, "couplings");
        for (auto& j : inst.coupling) j = rng.bit() ? 1.0 : -1.0;
    }
    return inst;
}

SamplerKind parse_sampler(const std::string& s) {
    if (s == "marginal") return SamplerKind::marginal;
    if (s == "linear") return SamplerKind::linear;
    throw std::runtime_error("--sampler expects marginal or linear");
}

std::string cplx_str(cplx z) {
    std::ostringstream ss;
    ss << std::setprecision(12) << z.real() << (z.imag() < 0 ? " - " : " + ") << std::abs(z.imag()) << "i";
    return ss.str();
}

int run_oracle(const Common& c, int n, const std::string& fspec, const std::string& gspec,
               double epsilon, bool exact_only, const std::string& sweep, int trials) {
    auto f = parse_oracle_spec(n, fspec);
    auto g = parse_oracle_spec(n, gspec);
    const bool small = n <= 24;
    double exact = 0;
    if (small) exact = phi_exact(*f, *g);
    std::cout << std::setprecision(12);
    if (exact_only) {
        if (!small) throw std::runtime_error("--exact needs n <= 24");
        std::cout << "phi_exact = " << exact << "\n";
        std::cout << "queries   = " << f->queries() + g->queries() << "\n";
        return 0;
    }
    if (!sweep.empty()) {
        auto eps_list = parse_list(sweep);
        std::ostream* os = &std::cout;
        std::ofstream file;
        if (!c.out.empty()) { file = open_out(c.out); os = &file; }
        CsvWriter csv(*os);
        csv.row({"epsilon", "trial", "estimate", "exact", "abs_error", "method", "k", "queries"});
        for (size_t ei = 0; ei < eps_list.size(); ++ei)
            for (int t = 0; t < trials; ++t) {
                RngStream rng = RngStream::derive(c.seed, "oracle-sweep", ei, uint64_t(t));
                f->reset_queries();
                g->reset_queries();
                auto est = phi_estimate(*f, *g, eps_list[ei], rng);
                csv.row({CsvWriter::num(eps_list[ei]), std::to_string(t), CsvWriter::num(est.value),
                         small ? CsvWriter::num(exact) : "",
                         small ? CsvWriter::num(std::abs(est.value - exact)) : "",
                         est.method == PhiMethod::exact ? "exact" : "affine", std::to_string(est.k),
                         std::to_string(est.queries_used)});
            }
        return 0;
    }
    RngStream rng = RngStream::derive(c.seed, "oracle");
    auto est = phi_estimate(*f, *g, epsilon, rng);
    std::cout << "estimate = " << est.value << "\n";
    std::cout << "method   = " << (est.method == PhiMethod::exact ? "exact" : "affine") << " (k=" << est.k
              << ")\n";
    std::cout << "queries  = " << est.queries_used << "\n";
    if (small) {
        std::cout << "exact    = " << exact << "\n";
        std::cout << "error    = " << std::abs(est.value - exact) << "\n";
    }
    return 0;
}

int run_kfold(const Common& c, int n, int k, std::string oracle_list, const std::string& fspec,
              const std::string& gspec, double epsilon, uint64_t samples_override) {
    if (oracle_list.empty()) {
        if (k != 2 || fspec.empty() || gspec.empty())
            throw std::runtime_error("provide --oracles spec,spec,... (or --f/--g with --k 2)");
        oracle_list = fspec + "," + gspec;
    }
    std::vector<std::unique_ptr<BooleanOracle>> owned;
    std::stringstream ss(oracle_list);
    std::string tok;
    while (std::getline(ss, tok, ',')) owned.push_back(parse_oracle_spec(n, tok));
    if (int(owned.size()) != k) throw std::runtime_error("--oracles must list exactly k specs");
    std::vector<const BooleanOracle*> oracles;
    for (auto& o : owned) oracles.push_back(o.get());
    RngStream rng = RngStream::derive(c.seed, "kfold");
    auto est = kfold_phi(oracles, {.epsilon = epsilon, .samples_override = samples_override}, rng);
    std::cout << std::setprecision(12);
    std::cout << "estimate = " << cplx_str(est.value) << "\n";
    std::cout << "branch   = " << (est.exact_branch ? "exact" : "sampled")
              << " (L=" << est.samples_per_level << ")\n";
    std::cout << "queries  = " << est.queries_used << "\n";
    if (est.annihilated) std::cout << "note     = intermediate state annihilated\n";
    if (n <= 20) {
        cplx exact = kfold_phi_exact(oracles);
        std::cout << "exact    = " << cplx_str(exact) << "\n";
        std::cout << "error    = " << std::abs(est.value - exact) << "\n";
    }
    return 0;
}

int run_graph_phi(const Common& c, const std::string& graph_file, const std::string& ffile,
                  const std::string& gfile, const std::string& ops_spec, double epsilon,
                  const std::string& sampler, bool exact_only, uint64_t samples_override) {
    IsingInstance shell = load_graph_file(graph_file);
    Graph graph = shell.graph;
    TwoLocalFunction f = ffile.empty() ? TwoLocalFunction::ones(graph) : load_two_local_file(ffile);
    TwoLocalFunction g = gfile.empty() ? TwoLocalFunction::ones(graph) : load_two_local_file(gfile);
    auto check_fit = [&](const TwoLocalFunction& h, const std::string& which) {
        if (h.graph.n != graph.n)
            throw std::runtime_error(which + ": vertex count differs from the graph file");
        for (auto [u, v] : h.graph.edges)
            if (!graph.has_edge(u, v))
                throw std::runtime_error(which + ": term on a missing edge " + std::to_string(u) + "-" +
                                         std::to_string(v));
    };
    check_fit(f, "--f");
    check_fit(g, "--g");
    // re-host the terms on the full graph so edge indices line up
    auto rehost = [&](const TwoLocalFunction& h) {
        TwoLocalFunction out = TwoLocalFunction::ones(graph);
        out.scalar = h.scalar;
        out.vertex_terms = h.vertex_terms;
        for (size_t e = 0; e < h.graph.edges.size(); ++e) {
            auto [u, v] = h.graph.edges[e];
            out.edge_term(u, v) = h.edge_terms[e];
        }
        return out;
    };
    auto inst = make_instance(graph, rehost(f), rehost(g), parse_ops_list(ops_spec, graph.n));
    std::cout << std::setprecision(12);
    std::cout << "partition: |A|=" << inst.plan.part.a.size() << " |B|=" << inst.plan.part.b.size()
              << " width=" << inst.plan.width << (inst.plan.used_peel ? " (peel)" : " (heuristic)")
              << "\n";
    bool exact_available = graph.n <= 20;
    cplx exact = 0;
    if (exact_available) exact = phi_graph_exact(inst);
    if (exact_only) {
        if (!exact_available) throw std::runtime_error("--exact needs n <= 20");
        std::cout << "phi = " << cplx_str(exact) << "\n";
        return 0;
    }
    RngStream rng = RngStream::derive(c.seed, "graph-phi");
    PhiGraphOptions opt;
    opt.epsilon = epsilon;
    opt.sampler = parse_sampler(sampler);
    opt.jobs = c.jobs;
    opt.samples_override = samples_override;
    auto est = phi_graph_estimate(inst, opt, rng);
    std::cout << "estimate = " << cplx_str(est.value) << "\n";
    std::cout << "samples  = " << est.samples << "  var(R) = " << est.var_r << "\n";
    if (est.annihilated) std::cout << "note     = zero-norm operator, value exactly 0\n";
    if (exact_available)
        std::cout << "exact    = " << cplx_str(exact) << "  (error " << std::abs(est.value - exact)
                  << ")\n";
    return 0;
}

int run_tnsample(const Common& c, const std::string& input, int trials) {
    QuditSystem sys = load_qudit_file(input);
    TreeDecomposition td = minfill_td(sys.connectivity());
    auto net = build_network(sys, td);
    RngStream rng = RngStream::derive(c.seed, "tnsample");
    std::ostream* os = &std::cout;
    std::ofstream file;
    if (!c.out.empty()) { file = open_out(c.out); os = &file; }
    CsvWriter csv(*os);
    std::vector<std::string> header{"trial"};
    for (int q = 0; q < sys.n; ++q) header.push_back("q" + std::to_string(q));
    csv.row(header);
    for (int t = 0; t < trials; ++t) {
        auto s = tn_sample(net, rng);
        if (!s.valid) {
            std::cerr << "no valid outputs: the distribution is identically zero\n";
            return 2;
        }
        std::vector<std::string> row{std::to_string(t)};
        for (int q = 0; q < sys.n; ++q) row.push_back(std::to_string(s.outcome[q]));
        csv.row(row);
    }
    return 0;
}

int run_qaoa_energy(const Common& c, const std::string& grid, int triangular,
                    const std::string& graph_file, const std::string& angles_str, double epsilon,
                    double cutoff, uint64_t samples_override, const std::string& sampler,
                    bool exact_only) {
    IsingInstance inst = lattice_instance(grid, triangular, graph_file, c.seed);
    auto av = parse_list(angles_str);
    if (av.size() != 4) throw std::runtime_error("--angles expects b1,b2,g1,g2");
    Angles a{av[0], av[1], av[2], av[3]};
    std::cout << std::setprecision(12);
    if (exact_only || inst.graph.n <= 20) {
        double exact = inst.offset;
        for (size_t e = 0; e < inst.graph.edges.size(); ++e) {
            auto [s, t] = inst.graph.edges[e];
            exact += inst.coupling[e] * zz_mean_statevector(inst, s, t, a);
        }
        std::cout << "exact energy    = " << exact << "\n";
        if (exact_only) return 0;
    }
    MeanOptions opt;
    opt.epsilon = epsilon;
    opt.cutoff_seconds = cutoff;
    opt.samples_override = samples_override;
    opt.sampler = parse_sampler(sampler);
    opt.jobs = c.jobs;
    RngStream rng = RngStream::derive(c.seed, "energy");
    std::vector<EdgeMeanReport> reports;
    double e = energy(inst, a, opt, rng, true, &reports);
    int hist[4] = {0, 0, 0, 0};
    for (const auto& r : reports) ++hist[int(r.method)];
    std::cout << "energy estimate = " << e << "\n";
    std::cout << "methods         = statevector:" << hist[0] << " A':" << hist[1] << " A'':" << hist[2]
              << " forrelation:" << hist[3] << "\n";
    return 0;
}

int run_rqaoa(const Common& c, const std::string& grid, int triangular, const std::string& graph_file,
              double epsilon, int brute_threshold, int gamma_grid, double cutoff,
              uint64_t samples_override, const std::string& sampler) {
    IsingInstance inst = lattice_instance(grid, triangular, graph_file, c.seed);
    RqaoaOptions opt;
    opt.epsilon = epsilon;
    opt.brute_threshold = brute_threshold;
    opt.gamma_grid = gamma_grid;
    opt.cutoff_seconds = cutoff;
    opt.samples_override = samples_override;
    opt.sampler = parse_sampler(sampler);
    opt.jobs = c.jobs;
    RngStream rng = RngStream::derive(c.seed, "rqaoa");
    auto res = rqaoa(inst, opt, rng);
    std::cout << std::setprecision(12);
    std::cout << "achieved cost = " << res.cost << "\n";
    if (inst.graph.n <= 26) {
        auto [z, best] = exact_maxcut(inst);
        std::cout << "optimal cost  = " << best << "\n";
        std::cout << "ratio         = " << (best != 0 ? res.cost / best : 1.0) << "\n";
    }
    std::cout << "assignment    =";
    for (int8_t z : res.assignment) std::cout << " " << (z > 0 ? "+1" : "-1");
    std::cout << "\n";
    std::ostream* os = &std::cout;
    std::ofstream file;
    if (!c.out.empty()) { file = open_out(c.out); os = &file; }
    CsvWriter csv(*os);
    csv.row({"step", "vertices", "edge_u", "edge_v", "sign", "m_value", "beta1", "beta2", "gamma1",
             "gamma2", "n_statevector", "n_aprime", "n_adoubleprime", "n_forrelation",
             "forrelation_calls", "wall_ms"});
    for (const auto& s : res.trace)
        csv.row({std::to_string(s.step), std::to_string(s.vertices), std::to_string(s.edge_u),
                 std::to_string(s.edge_v), std::to_string(s.sign), CsvWriter::num(s.m_value),
                 CsvWriter::num(s.angles.beta1), CsvWriter::num(s.angles.beta2),
                 CsvWriter::num(s.angles.gamma1), CsvWriter::num(s.angles.gamma2),
                 std::to_string(s.method_counts[0]), std::to_string(s.method_counts[1]),
                 std::to_string(s.method_counts[2]), std::to_string(s.method_counts[3]),
                 std::to_string(s.forrelation_calls), CsvWriter::num(s.wall_seconds * 1000)});
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"classical forrelation estimation and level-2 QAOA tools"};
    app.require_subcommand(1);

    Common c;
    app.add_option("--seed", c.seed, "master seed (all randomness derives from it)");
    app.add_option("--jobs", c.jobs, "worker threads");
    app.add_option("--out", c.out, "CSV output path (default stdout)");

    int n = 8, k = 2, trials = 10, triangular = 0, brute_threshold = 10, gamma_grid = 30;
    double epsilon = 0.1, cutoff = 0.1;
    uint64_t samples_override = 0;
    bool exact_only = false;
    std::string fspec, gspec, oracle_list, sweep, graph_file, grid, ops_spec = "H",
                                                                    angles_str = "0,0,0,0", input,
                                                                    sampler = "linear";

    auto* oracle = app.add_subcommand("oracle", "two-function forrelation Phi(f,g)");
    oracle->add_option("--n", n)->required();
    oracle->add_option("--f", fspec)->required();
    oracle->add_option("--g", gspec)->required();
    oracle->add_option("--epsilon", epsilon);
    oracle->add_flag("--exact", exact_only);
    oracle->add_option("--sweep", sweep, "comma-separated epsilon values");
    oracle->add_option("--trials", trials);

    auto* kfold = app.add_subcommand("kfold", "k-fold forrelation / query amplitude");
    kfold->add_option("--n", n)->required();
    kfold->add_option("--k", k)->required();
    kfold->add_option("--oracles", oracle_list, "comma-separated oracle specs");
    kfold->add_option("--f", fspec);
    kfold->add_option("--g", gspec);
    kfold->add_option("--epsilon", epsilon);
    kfold->add_option("--samples-override", samples_override);

    auto* gphi = app.add_subcommand("graph-phi", "graph-based forrelation");
    gphi->add_option("--graph", graph_file)->required();
    gphi->add_option("--f", fspec);
    gphi->add_option("--g", gspec);
    gphi->add_option("--ops", ops_spec);
    gphi->add_option("--epsilon", epsilon);
    gphi->add_option("--sampler", sampler);
    gphi->add_flag("--exact", exact_only);
    gphi->add_option("--samples-override", samples_override);

    auto* tns = app.add_subcommand("tnsample", "sample a diagonal-gate qudit system");
    tns->add_option("--input", input)->required();
    tns->add_option("--trials", trials);

    auto* qe = app.add_subcommand("qaoa-energy", "level-2 QAOA variational energy");
    qe->add_option("--grid", grid);
    qe->add_option("--triangular", triangular);
    qe->add_option("--graph", graph_file);
    qe->add_option("--angles", angles_str, "b1,b2,g1,g2");
    qe->add_option("--epsilon", epsilon);
    qe->add_option("--cutoff-seconds", cutoff);
    qe->add_option("--samples-override", samples_override);
    qe->add_option("--sampler", sampler);
    qe->add_flag("--exact", exact_only);

    auto* rq = app.add_subcommand("rqaoa", "recursive level-2 QAOA");
    rq->add_option("--grid", grid);
    rq->add_option("--triangular", triangular);
    rq->add_option("--graph", graph_file);
    rq->add_option("--epsilon", epsilon);
    rq->add_option("--brute-threshold", brute_threshold);
    rq->add_option("--gamma-grid", gamma_grid);
    rq->add_option("--cutoff-seconds", cutoff);
    rq->add_option("--samples-override", samples_override);
    rq->add_option("--sampler", sampler);

    for (auto* sub : {oracle, kfold, gphi, tns, qe, rq}) sub->fallthrough();

    CLI11_PARSE(app, argc, argv);

    try {
        if (oracle->parsed()) return run_oracle(c, n, fspec, gspec, epsilon, exact_only, sweep, trials);
        if (kfold->parsed())
            return run_kfold(c, n, k, oracle_list, fspec, gspec, epsilon, samples_override);
        if (gphi->parsed())
            return run_graph_phi(c, graph_file, fspec, gspec, ops_spec, epsilon, sampler, exact_only,
                                 samples_override);
        if (tns->parsed()) return run_tnsample(c, input, trials);
        if (qe->parsed())
            return run_qaoa_energy(c, grid, triangular, graph_file, angles_str, epsilon, cutoff,
                                   samples_override, sampler, exact_only);
        if (rq->parsed())
            return run_rqaoa(c, grid, triangular, graph_file, epsilon, brute_threshold, gamma_grid,
                             cutoff, samples_override, sampler);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
