#include <catch2/catch_amalgamated.hpp>

#include <sstream>

#include "forr/io.hpp"
#include "forr/oracle.hpp"

using namespace forr;

TEST_CASE("graph text round trip") {
    Graph g = generate_grid(3, 3);
    auto inst = IsingInstance::on(g);
    RngStream rng(91);
    for (auto& j : inst.coupling) j = rng.bit() ? 1.0 : -1.0;
    std::string text = write_graph_text(inst);
    std::istringstream in(text);
    auto back = parse_graph_text(in);
    CHECK(back.graph.n == inst.graph.n);
    CHECK(back.graph.edges == inst.graph.edges);
    CHECK(back.coupling == inst.coupling);
    REQUIRE(back.graph.rotation.has_value());
    CHECK(*back.graph.rotation == *inst.graph.rotation);
    CHECK(*back.graph.outer_face == *inst.graph.outer_face);
    // the reparsed embedding still peels
    CHECK(peel_partition(back.graph).has_value());
}

TEST_CASE("graph text errors carry line numbers") {
    std::istringstream bad1("e 0 1\n");
    CHECK_THROWS_WITH(parse_graph_text(bad1, "f"), Catch::Matchers::ContainsSubstring("missing 'n"));
    std::istringstream bad2("n 3\nq 1\n");
    CHECK_THROWS_WITH(parse_graph_text(bad2, "f"), Catch::Matchers::ContainsSubstring("f:2"));
    std::istringstream bad3("n 3\ne 0 x\n");
    CHECK_THROWS_WITH(parse_graph_text(bad3, "f"), Catch::Matchers::ContainsSubstring("expected a number"));
}

TEST_CASE("two-local text format") {
    std::istringstream in(
        "n 4\n"
        "v 0 1 0 0 1\n"
        "e 0 1 1 0 1 0 1 0 -1 0\n"
        "ve 2 phase: 0.5 1\n"
        "ee 2 3 phase: 0 0 0 1\n");
    auto h = parse_two_local_text(in);
    CHECK(h.graph.n == 4);
    CHECK(h.graph.edges.size() == 2);
    CHECK(h.vertex_terms[0][1] == cplx(0, 1));
    // phase shorthand: e^{i pi/2} = i
    CHECK(std::abs(h.vertex_terms[2][0] - cplx(0, 1)) < 1e-12);
    CHECK(std::abs(h.vertex_terms[2][1] - cplx(-1, 0)) < 1e-12);
    CHECK(std::abs(h.edge_term(2, 3)[3] - cplx(-1, 0)) < 1e-12);
    CHECK(h.edge_term(0, 1)[3] == cplx(-1, 0));
}

TEST_CASE("operator specs") {
    CHECK(parse_op_spec("H").m[0] == cplx(1 / std::sqrt(2.0)));
    CHECK(parse_op_spec("I").is_identity());
    CHECK(parse_op_spec("rx:0.6").is_unitary(1e-12));
    CHECK(parse_op_spec("rz:1.2").is_unitary(1e-12));
    Mat2 p = parse_op_spec("proj:01");
    CHECK(p.m[1] == cplx(1));
    Mat2 m = parse_op_spec("mat:0,0,1,0,0,0,0,0");
    CHECK(m.m[1] == cplx(1, 0));
    CHECK_THROWS(parse_op_spec("bogus:1"));

    auto ops = parse_ops_list("H", 4);
    CHECK(ops.size() == 4);
    auto ops2 = parse_ops_list("H,I,rz:0.3,proj:00", 4);
    CHECK(ops2[1].is_identity());
    CHECK_THROWS(parse_ops_list("H,I", 4));
}

TEST_CASE("qudit system text format") {
    std::istringstream in(
        "n 3 d 2\n"
        "chi 0 0.25 0.75\n"
        "gate 2 0 1 1 0 0.5 0 0.5 0 1 0\n"
        "gate 1 2 1 0 -1 0\n"
        "op 2 H\n");
    auto sys = parse_qudit_text(in);
    CHECK(sys.n == 3);
    CHECK(sys.chi[0][0] == cplx(0.25));
    CHECK(sys.gates.size() == 2);
    CHECK(sys.gates[0].support == std::vector<int>{0, 1});
    CHECK(!sys.op_is_identity(2));
    CHECK(sys.op_is_identity(1));
}

TEST_CASE("oracle spec parsing") {
    auto f = parse_oracle_spec(4, "const:+1");
    CHECK(f->evaluate(3) == 1);
    auto g = parse_oracle_spec(4, "parity:3");
    CHECK(g->evaluate(0b0011) == 1);
    CHECK(g->evaluate(0b0001) == -1);
    auto h = parse_oracle_spec(4, "rand:7");
    CHECK(h->evaluate(5) == parse_oracle_spec(4, "rand:7")->evaluate(5));
    CHECK_THROWS(parse_oracle_spec(4, "const:2"));
    CHECK_THROWS(parse_oracle_spec(4, "nope"));
}

TEST_CASE("derived rng streams are stable and independent of workers") {
    // same derivation inputs, same stream
    RngStream a = RngStream::derive(42, "x", 1, 2);
    RngStream b = RngStream::derive(42, "x", 1, 2);
    for (int i = 0; i < 8; ++i) CHECK(a.u64() == b.u64());
    RngStream cstream = RngStream::derive(42, "x", 1, 3);
    bool differs = false;
    RngStream a2 = RngStream::derive(42, "x", 1, 2);
    for (int i = 0; i < 8; ++i) differs |= a2.u64() != cstream.u64();
    CHECK(differs);
}
