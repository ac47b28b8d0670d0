#pragma once

#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>

#include "forr/graph_forrelation.hpp"
#include "forr/qaoa.hpp"
#include "forr/tn_sampler.hpp"

namespace forr {

namespace io_detail {

struct LineError : std::runtime_error {
    LineError(const std::string& file, size_t line, const std::string& what)
        : std::runtime_error(file + ":" + std::to_string(line) + ": " + what) {}
};

inline std::vector<std::string> tokens(const std::string& line) {
    std::istringstream in(line);
    std::vector<std::string> out;
    std::string t;
    while (in >> t) out.push_back(t);
    return out;
}

inline double num(const std::string& file, size_t line, const std::string& tok) {
    try {
        size_t used = 0;
        double v = std::stod(tok, &used);
        if (used != tok.size()) throw std::invalid_argument(tok);
        return v;
    } catch (...) {
        throw LineError(file, line, "expected a number, got '" + tok + "'");
    }
}

inline int integer(const std::string& file, size_t line, const std::string& tok) {
    double v = num(file, line, tok);
    int i = int(v);
    if (double(i) != v) throw LineError(file, line, "expected an integer, got '" + tok + "'");
    return i;
}

}  // namespace io_detail

// Graph text format:
//   n <count>
//   e <u> <v> [J]
//   rot <v> <neighbor...>
//   outer <v...>
// Vertices are 0-based. Couplings default to 0 when absent.
inline IsingInstance parse_graph_text(std::istream& in, const std::string& name = "<graph>") {
    using io_detail::LineError;
    std::string line;
    size_t lineno = 0;
    int n = -1;
    std::vector<std::tuple<int, int, double>> edges;
    std::vector<std::pair<int, std::vector<int>>> rotations;
    std::vector<int> outer;
    bool has_outer = false;
    while (std::getline(in, line)) {
        ++lineno;
        auto toks = io_detail::tokens(line);
        if (toks.empty() || toks[0][0] == '#') continue;
        if (toks[0] == "n") {
            if (toks.size() != 2) throw LineError(name, lineno, "n expects one count");
            n = io_detail::integer(name, lineno, toks[1]);
        } else if (toks[0] == "e") {
            if (toks.size() != 3 && toks.size() != 4) throw LineError(name, lineno, "e expects u v [J]");
            int u = io_detail::integer(name, lineno, toks[1]);
            int v = io_detail::integer(name, lineno, toks[2]);
            double j = toks.size() == 4 ? io_detail::num(name, lineno, toks[3]) : 0.0;
            edges.push_back({u, v, j});
        } else if (toks[0] == "rot") {
            if (toks.size() < 2) throw LineError(name, lineno, "rot expects a vertex");
            int v = io_detail::integer(name, lineno, toks[1]);
            std::vector<int> cyc;
            for (size_t i = 2; i < toks.size(); ++i) cyc.push_back(io_detail::integer(name, lineno, toks[i]));
            rotations.push_back({v, std::move(cyc)});
        } else if (toks[0] == "outer") {
            has_outer = true;
            for (size_t i = 1; i < toks.size(); ++i) outer.push_back(io_detail::integer(name, lineno, toks[i]));
        } else {
            throw LineError(name, lineno, "unknown record '" + toks[0] + "'");
        }
    }
    if (n < 0) throw LineError(name, lineno, "missing 'n <count>' header");
    Graph g(n);
    for (auto [u, v, j] : edges) {
        if (u < 0 || u >= n || v < 0 || v >= n) throw LineError(name, 0, "edge endpoint out of range");
        g.add_edge(u, v);
    }
    if (!rotations.empty()) {
        std::vector<std::vector<int>> rot(n);
        auto adj = g.adjacency();
        for (int v = 0; v < n; ++v) rot[v] = adj[v];
        for (auto& [v, cyc] : rotations) {
            for (int w : cyc)
                if (!g.has_edge(v, w)) throw LineError(name, 0, "rotation references a missing edge");
            rot[v] = cyc;
        }
        g.rotation = std::move(rot);
    }
    if (has_outer) g.outer_face = outer;
    IsingInstance inst = IsingInstance::on(std::move(g));
    for (auto [u, v, j] : edges) inst.coupling[inst.graph.edge_index(u, v)] = j;
    return inst;
}

inline IsingInstance load_graph_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open graph file: " + path);
    return parse_graph_text(in, path);
}

inline std::string write_graph_text(const IsingInstance& inst) {
    std::ostringstream out;
    out << "n " << inst.graph.n << "\n";
    for (size_t e = 0; e < inst.graph.edges.size(); ++e) {
        auto [u, v] = inst.graph.edges[e];
        out << "e " << u << " " << v << " " << inst.coupling[e] << "\n";
    }
    if (inst.graph.rotation)
        for (int v = 0; v < inst.graph.n; ++v) {
            out << "rot " << v;
            for (int w : (*inst.graph.rotation)[v]) out << " " << w;
            out << "\n";
        }
    if (inst.graph.outer_face) {
        out << "outer";
        for (int v : *inst.graph.outer_face) out << " " << v;
        out << "\n";
    }
    return out.str();
}

// Two-local function text format:
//   n <count>
//   v <u> <re0> <im0> <re1> <im1>
//   e <u> <v> <re00> <im00> <re01> <im01> <re10> <im10> <re11> <im11>
//   ve <u> phase: <p0> <p1>                  (value e^{i pi p})
//   ee <u> <v> phase: <p00> <p01> <p10> <p11>
inline TwoLocalFunction parse_two_local_text(std::istream& in, const std::string& name = "<terms>") {
    using io_detail::LineError;
    std::string line;
    size_t lineno = 0;
    int n = -1;
    struct VRec { int u; std::vector<cplx> t; };
    struct ERec { int u, v; std::vector<cplx> t; };
    std::vector<VRec> vrecs;
    std::vector<ERec> erecs;
    auto phase = [](double p) { return std::polar(1.0, M_PI * p); };
    while (std::getline(in, line)) {
        ++lineno;
        auto toks = io_detail::tokens(line);
        if (toks.empty() || toks[0][0] == '#') continue;
        if (toks[0] == "n") {
            n = io_detail::integer(name, lineno, toks.at(1));
        } else if (toks[0] == "v") {
            if (toks.size() != 6) throw LineError(name, lineno, "v expects u and 4 floats");
            VRec r;
            r.u = io_detail::integer(name, lineno, toks[1]);
            for (int i = 0; i < 2; ++i)
                r.t.push_back(cplx(io_detail::num(name, lineno, toks[2 + 2 * i]),
                                   io_detail::num(name, lineno, toks[3 + 2 * i])));
            vrecs.push_back(std::move(r));
        } else if (toks[0] == "e") {
            if (toks.size() != 11) throw LineError(name, lineno, "e expects u v and 8 floats");
            ERec r;
            r.u = io_detail::integer(name, lineno, toks[1]);
            r.v = io_detail::integer(name, lineno, toks[2]);
            for (int i = 0; i < 4; ++i)
                r.t.push_back(cplx(io_detail::num(name, lineno, toks[3 + 2 * i]),
                                   io_detail::num(name, lineno, toks[4 + 2 * i])));
            erecs.push_back(std::move(r));
        } else if (toks[0] == "ve") {
            if (toks.size() != 5 || toks[2] != "phase:")
                throw LineError(name, lineno, "ve expects: ve <u> phase: <p0> <p1>");
            VRec r;
            r.u = io_detail::integer(name, lineno, toks[1]);
            r.t = {phase(io_detail::num(name, lineno, toks[3])), phase(io_detail::num(name, lineno, toks[4]))};
            vrecs.push_back(std::move(r));
        } else if (toks[0] == "ee") {
            if (toks.size() != 8 || toks[3] != "phase:")
                throw LineError(name, lineno, "ee expects: ee <u> <v> phase: <p00> <p01> <p10> <p11>");
            ERec r;
            r.u = io_detail::integer(name, lineno, toks[1]);
            r.v = io_detail::integer(name, lineno, toks[2]);
            for (int i = 0; i < 4; ++i) r.t.push_back(phase(io_detail::num(name, lineno, toks[4 + i])));
            erecs.push_back(std::move(r));
        } else {
            throw LineError(name, lineno, "unknown record '" + toks[0] + "'");
        }
    }
    if (n < 0) throw LineError(name, lineno, "missing 'n <count>' header");
    Graph g(n);
    for (const auto& r : erecs) g.add_edge(r.u, r.v);
    TwoLocalFunction h = TwoLocalFunction::ones(std::move(g));
    for (const auto& r : vrecs) {
        if (r.u < 0 || r.u >= n) throw LineError(name, 0, "vertex out of range");
        for (int i = 0; i < 2; ++i) h.vertex_terms[r.u][i] *= r.t[i];
    }
    for (const auto& r : erecs) {
        auto& t = h.edge_term(std::min(r.u, r.v), std::max(r.u, r.v));
        for (int a = 0; a < 2; ++a)
            for (int b = 0; b < 2; ++b) {
                int src = r.u < r.v ? a * 2 + b : b * 2 + a;
                t[a * 2 + b] *= r.t[src];
            }
    }
    return h;
}

inline TwoLocalFunction load_two_local_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open term file: " + path);
    return parse_two_local_text(in, path);
}

// Operator spec strings: H | I | rx:<angle> | rz:<angle> | proj:<a><b> |
// mat:<8 comma-separated floats, row-major re,im pairs>
inline Mat2 parse_op_spec(const std::string& spec) {
    if (spec == "H") return Mat2::hadamard();
    if (spec == "I") return Mat2::identity();
    auto colon = spec.find(':');
    std::string kind = spec.substr(0, colon);
    std::string arg = colon == std::string::npos ? "" : spec.substr(colon + 1);
    if (kind == "rx") return Mat2::exp_ix(-std::stod(arg) / 2);  // exp(-i theta X/2)
    if (kind == "rz") return Mat2::exp_iz(-std::stod(arg) / 2);  // exp(-i theta Z/2)
    if (kind == "proj") {
        if (arg.size() != 2 || (arg[0] != '0' && arg[0] != '1') || (arg[1] != '0' && arg[1] != '1'))
            throw std::invalid_argument("proj expects two bits, e.g. proj:01");
        return Mat2::projector(arg[0] - '0', arg[1] - '0');
    }
    if (kind == "mat") {
        std::vector<double> vals;
        std::stringstream ss(arg);
        std::string tok;
        while (std::getline(ss, tok, ',')) vals.push_back(std::stod(tok));
        if (vals.size() != 8) throw std::invalid_argument("mat expects 8 floats");
        Mat2 m;
        for (int i = 0; i < 4; ++i) m.m[i] = cplx(vals[2 * i], vals[2 * i + 1]);
        return m;
    }
    throw std::invalid_argument("unknown operator spec '" + spec + "'");
}

// one spec applied everywhere, or a comma-separated list (one per vertex)
inline std::vector<Mat2> parse_ops_list(const std::string& spec, int n) {
    std::vector<std::string> parts;
    std::stringstream ss(spec);
    std::string tok;
    while (std::getline(ss, tok, ',')) parts.push_back(tok);
    // "mat:..." specs contain commas themselves; treat a lone spec specially
    if (spec.rfind("mat:", 0) == 0) parts = {spec};
    std::vector<Mat2> ops;
    if (parts.size() == 1) {
        ops.assign(n, parse_op_spec(parts[0]));
    } else {
        if (int(parts.size()) != n)
            throw std::invalid_argument("operator list must have one entry per vertex");
        for (const auto& p : parts) ops.push_back(parse_op_spec(p));
    }
    return ops;
}

// Qudit system text format for the tnsample command (MRF style):
//   n <count> d <dim>
//   chi <i> <p_0 ... p_{d-1}>            (diagonal entries)
//   gate <k> <q_1 ... q_k> <d^k re im pairs>
//   op <i> <spec>                        (2x2 specs, d=2 only; default I)
inline QuditSystem parse_qudit_text(std::istream& in, const std::string& name = "<tn>") {
    using io_detail::LineError;
    std::string line;
    size_t lineno = 0;
    QuditSystem sys;
    bool have_header = false;
    while (std::getline(in, line)) {
        ++lineno;
        auto toks = io_detail::tokens(line);
        if (toks.empty() || toks[0][0] == '#') continue;
        if (toks[0] == "n") {
            if (toks.size() != 4 || toks[2] != "d") throw LineError(name, lineno, "header: n <count> d <dim>");
            sys = QuditSystem::make(io_detail::integer(name, lineno, toks[1]),
                                    io_detail::integer(name, lineno, toks[3]));
            have_header = true;
        } else if (!have_header) {
            throw LineError(name, lineno, "header 'n <count> d <dim>' must come first");
        } else if (toks[0] == "chi") {
            if (int(toks.size()) != 2 + sys.d) throw LineError(name, lineno, "chi expects d diagonal entries");
            int i = io_detail::integer(name, lineno, toks[1]);
            if (i < 0 || i >= sys.n) throw LineError(name, lineno, "chi index out of range");
            std::vector<cplx> mat(size_t(sys.d) * sys.d, cplx(0));
            double total = 0;
            for (int a = 0; a < sys.d; ++a) {
                double p = io_detail::num(name, lineno, toks[2 + a]);
                mat[size_t(a) * sys.d + a] = p;
                total += p;
            }
            if (total <= 0) throw LineError(name, lineno, "chi diagonal must have positive mass");
            for (auto& z : mat) z /= total;
            sys.chi[i] = std::move(mat);
        } else if (toks[0] == "gate") {
            if (toks.size() < 2) throw LineError(name, lineno, "gate expects arity");
            int k = io_detail::integer(name, lineno, toks[1]);
            size_t dim = 1;
            for (int i = 0; i < k; ++i) dim *= sys.d;
            if (toks.size() != 2 + size_t(k) + 2 * dim)
                throw LineError(name, lineno, "gate expects supports then d^k re/im pairs");
            DiagonalGate g;
            for (int i = 0; i < k; ++i) {
                int q = io_detail::integer(name, lineno, toks[2 + i]);
                if (q < 0 || q >= sys.n) throw LineError(name, lineno, "gate support out of range");
                g.support.push_back(q);
            }
            if (!std::is_sorted(g.support.begin(), g.support.end()))
                throw LineError(name, lineno, "gate support must be sorted ascending");
            for (size_t i = 0; i < dim; ++i)
                g.diag.push_back(cplx(io_detail::num(name, lineno, toks[2 + k + 2 * i]),
                                      io_detail::num(name, lineno, toks[3 + k + 2 * i])));
            sys.gates.push_back(std::move(g));
        } else if (toks[0] == "op") {
            if (toks.size() != 3) throw LineError(name, lineno, "op expects index and spec");
            if (sys.d != 2) throw LineError(name, lineno, "op specs are 2x2; use d=2");
            int i = io_detail::integer(name, lineno, toks[1]);
            Mat2 m = parse_op_spec(toks[2]);
            sys.ops[i].assign(m.m.begin(), m.m.end());
        } else {
            throw LineError(name, lineno, "unknown record '" + toks[0] + "'");
        }
    }
    if (!have_header) throw LineError(name, lineno, "missing header");
    return sys;
}

inline QuditSystem load_qudit_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open tn file: " + path);
    return parse_qudit_text(in, path);
}

// minimal CSV writer; fields we emit never need quoting but commas in
// strings are escaped anyway
class CsvWriter {
public:
    explicit CsvWriter(std::ostream& out) : out_(out) { out_ << std::setprecision(12); }

    void row(const std::vector<std::string>& fields) {
        for (size_t i = 0; i < fields.size(); ++i) {
            if (i) out_ << ",";
            bool quote = fields[i].find_first_of(",\"\n") != std::string::npos;
            if (!quote) {
                out_ << fields[i];
            } else {
                out_ << '"';
                for (char c : fields[i]) {
                    if (c == '"') out_ << '"';
                    out_ << c;
                }
                out_ << '"';
            }
        }
        out_ << "\n";
    }

    static std::string num(double v) {
        std::ostringstream ss;
        ss << std::setprecision(12) << v;
        return ss.str();
    }

private:
    std::ostream& out_;
};

}  // namespace forr
