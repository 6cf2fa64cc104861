#include <doctest.h>

#include <algorithm>

#include "fixtures.hpp"
#include "qbe/assist.hpp"
#include "qbe/synth.hpp"

using namespace qbe;
using fixtures::code_of;

namespace {

std::set<Annotation> as_set(const std::vector<Annotation>& v) { return {v.begin(), v.end()}; }

}  // namespace

TEST_CASE("first-stage proposals share a value with the example") {
    auto db = fixtures::trip_db();
    ExplanationDraft draft{{"Argentina", "Brazil"}, {}};
    CHECK(as_set(proposed_annotations(draft, *db)) == std::set<Annotation>{"a", "b", "c", "f", "h"});

    const auto props = propose_explanation_tuples(draft, *db);
    REQUIRE_FALSE(props.empty());
    // a shares both values and ranks first.
    CHECK(props.front().annotation == "a");
    CHECK(props.front().shared_positions == std::vector<std::size_t>{0, 1});
}

TEST_CASE("choosing a tuple widens the proposals") {
    auto db = fixtures::trip_db();
    ExplanationDraft draft{{"Argentina", "Brazil"}, {"f"}};
    CHECK(as_set(proposed_annotations(draft, *db)) ==
          std::set<Annotation>{"a", "b", "c", "d", "e", "f", "h"});
    draft.chosen = {"f", "f"};
    CHECK(as_set(proposed_annotations(draft, *db)).count("f") == 1);
}

TEST_CASE("empty database proposes nothing") {
    Schema s;
    s.add("route", {"A", "B"});
    AnnotatedDatabase empty(s);
    CHECK(proposed_annotations({{"Argentina", "Brazil"}, {}}, empty).empty());
}

TEST_CASE("proposals only grow as tuples are chosen") {
    Rng rng(9);
    DatabaseSpec spec;
    spec.rows_per_relation = 15;
    spec.domain = 8;
    for (int i = 0; i < 30; ++i) {
        auto db = random_database(spec, rng);
        const auto all = db->annotations();
        const auto& first = db->rows("R1").front().values;
        ExplanationDraft draft{{first[0], first[1]}, {}};
        auto before = as_set(proposed_annotations(draft, *db));
        for (int step = 0; step < 4; ++step) {
            draft.chosen.push_back(all[std::uniform_int_distribution<std::size_t>(0, all.size() - 1)(rng)]);
            const auto after = as_set(proposed_annotations(draft, *db));
            CHECK(std::includes(after.begin(), after.end(), before.begin(), before.end()));
            before = after;
        }
    }
}

TEST_CASE("true explanations always touch a first-stage proposal") {
    Rng rng(4);
    DatabaseSpec dbs;
    dbs.rows_per_relation = 20;
    dbs.domain = 6;
    QuerySpec qs;
    qs.min_atoms = 1;
    qs.max_atoms = 4;
    int checked = 0;
    for (int i = 0; i < 40; ++i) {
        auto db = random_database(dbs, rng);
        const auto q = random_query(db->schema(), qs, rng);
        for (const auto& row : sample_examples(q, *db, 3, 3, SemiringKind::NX, rng)) {
            const auto first = as_set(proposed_annotations({row.tuple, {}}, *db));
            for (const auto& m : row.provenance.monomials) {
                bool touched = false;
                for (const auto& f : m.factors) touched = touched || first.count(f.token);
                CHECK(touched);
                ++checked;
            }
        }
    }
    CHECK(checked > 50);
}

TEST_CASE("compiling drafts") {
    auto db = fixtures::trip_db();
    const Tuple ab{"Argentina", "Brazil"}, pp{"Peru", "Paraguay"};

    const auto why = compile_explanations(
        {{ab, {{ab, {"f", "e", "c", "a"}}, {ab, {"a", "c", "b"}}}}, {pp, {{pp, {"d", "e", "c", "h"}}}}}, db);
    CHECK(why.kind == SemiringKind::WhyX);
    CHECK(why.output[0].provenance == parse_polynomial("f.e.c.a + a.c.b", SemiringKind::WhyX));
    CHECK(why.output[1].provenance == parse_polynomial("d.e.c.h", SemiringKind::WhyX));

    const auto bx = compile_explanations({{ab, {{ab, {"a", "a", "c", "b"}}}}}, db);
    CHECK(bx.kind == SemiringKind::BX);
    CHECK(format_polynomial(bx.output[0].provenance) == "a^2.b.c");

    const auto trio = compile_explanations({{ab, {{ab, {"a", "c", "b"}}, {ab, {"b", "a", "c"}}}}}, db);
    CHECK(trio.kind == SemiringKind::TrioX);
    CHECK(format_polynomial(trio.output[0].provenance) == "2*a.b.c");

    CHECK(code_of([&] { compile_explanations({{ab, {}}}, db); }) == ErrorCode::EmptyExplanations);
    CHECK(code_of([&] { compile_explanations({{ab, {{ab, {"zz"}}}}}, db); }) == ErrorCode::UnknownAnnotation);
}

TEST_CASE("drafts read off a polynomial compile back to it") {
    auto db = fixtures::trip_db();
    const Tuple ab{"Argentina", "Brazil"};
    const auto poly = parse_polynomial("f.e.c.a + a^2.c.b");
    ExampleDrafts ed{ab, {}};
    for (const auto& m : poly.monomials) ed.drafts.push_back({ab, m.occurrences()});
    const auto ex = compile_explanations({ed}, db);
    CHECK(ex.kind == SemiringKind::BX);
    CHECK(format_polynomial(ex.output[0].provenance) == format_polynomial(poly));
}
