#include <doctest.h>

#include "fixtures.hpp"

using namespace qbe;
using fixtures::code_of;

namespace {

const char* kRoutes = "A,B\nArgentina,Brazil\nBrazil,Bolivia\nBolivia,Argentina\n";

}  // namespace

TEST_CASE("schema manifest") {
    const auto m = parse_schema_manifest("# trip data\nroute(A, B) annotated\n\nstop(City)\n");
    REQUIRE(m.size() == 2);
    CHECK(m[0].name == "route");
    CHECK(m[0].attributes == std::vector<std::string>{"A", "B"});
    CHECK(m[0].annotated);
    CHECK_FALSE(m[1].annotated);
    CHECK(code_of([] { parse_schema_manifest("route(A, B"); }) == ErrorCode::SyntaxError);
}

TEST_CASE("csv records") {
    CHECK(split_csv_line("a,b,c") == std::vector<std::string>{"a", "b", "c"});
    CHECK(split_csv_line("\"x, y\",z") == std::vector<std::string>{"x, y", "z"});
    CHECK(split_csv_line("\"say \"\"hi\"\"\",") == std::vector<std::string>{"say \"hi\"", ""});
}

TEST_CASE("the route fixture loads with explicit annotations") {
    auto db = fixtures::trip_db();
    CHECK(db->size() == 8);
    CHECK(db->tuple_of("a") == Tuple{"Argentina", "Brazil"});
    CHECK(db->tuple_of("h") == Tuple{"Argentina", "Paraguay"});
    CHECK(db->relation_of("e") == "route");
}

TEST_CASE("rows without an annotation column get generated tokens") {
    const auto db = load_database("route(A, B)", {{"route", kRoutes}});
    CHECK(db.size() == 3);
    CHECK(db.tuple_of("route1") == Tuple{"Argentina", "Brazil"});
    CHECK(db.tuple_of("route3") == Tuple{"Bolivia", "Argentina"});
}

TEST_CASE("load errors") {
    CHECK(code_of([] { load_database("route(A, B)", {{"route", "A,B\nx,y,z\n"}}); }) ==
          ErrorCode::SchemaMismatch);
    CHECK(code_of([] { load_database("route(A, B)", {{"route", "A,C\nx,y\n"}}); }) ==
          ErrorCode::SchemaMismatch);
    CHECK(code_of([] {
              load_database("route(A, B) annotated", {{"route", "id,A,B\na,x,y\na,y,z\n"}});
          }) == ErrorCode::DuplicateAnnotation);
    CHECK(code_of([] { load_database_dir(fixtures::path("missing")); }) == ErrorCode::NotFound);
}

TEST_CASE("example blocks") {
    const auto blocks = parse_examples("# two examples\nArgentina,Brazil\nf.e.c.a\n2*a.c.b\n\nPeru,Paraguay\nd.e.c.h\n");
    REQUIRE(blocks.size() == 2);
    CHECK(blocks[0].tuple == Tuple{"Argentina", "Brazil"});
    REQUIRE(blocks[0].monomials.size() == 2);
    CHECK(blocks[0].monomials[1].coefficient == 2);
    const auto expl = explanations_of(blocks);
    CHECK(expl[0].size() == 3);
}

TEST_CASE("examples are detected and projected") {
    const auto why = fixtures::trip_example("examples_why.txt");
    CHECK(why.kind == SemiringKind::WhyX);
    CHECK(why.output.size() == 2);

    // The N[X] file has a squared token but no repeated explanation.
    const auto auto_nx = fixtures::trip_example("examples_nx.txt");
    CHECK(auto_nx.kind == SemiringKind::BX);
    const auto forced = fixtures::trip_example("examples_nx.txt", SemiringKind::NX);
    CHECK(forced.kind == SemiringKind::NX);
    CHECK(forced.output[0].provenance == parse_polynomial("f.e.c.a + a^2.c.b"));

    const auto down = fixtures::trip_example("examples_nx.txt", SemiringKind::WhyX);
    CHECK(down.output[0].provenance == parse_polynomial("a.c.b + f.e.c.a", SemiringKind::WhyX));
}

TEST_CASE("blocks with the same tuple merge") {
    auto db = fixtures::trip_db();
    const auto ex = make_example(db, parse_examples("Argentina,Brazil\na.c.b\n\nArgentina,Brazil\nf.e.c.a\n"));
    REQUIRE(ex.output.size() == 1);
    CHECK(ex.output[0].provenance.monomials.size() == 2);
}

TEST_CASE("example errors name the problem") {
    auto db = fixtures::trip_db();
    try {
        make_example(db, parse_examples("Argentina,Brazil\nzz.a\n"));
        FAIL("expected UnknownAnnotation");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::UnknownAnnotation);
        CHECK(std::string(e.what()).find("zz") != std::string::npos);
    }
    CHECK(code_of([&] { make_example(db, parse_examples("Argentina,Brazil\na\n\nPeru\nd\n")); }) ==
          ErrorCode::SchemaMismatch);
    CHECK(code_of([&] { make_example(db, parse_examples("Argentina,Brazil\n")); }) ==
          ErrorCode::EmptyExplanations);
}
