#include <doctest.h>

#include "fixtures.hpp"
#include "oracle.hpp"
#include "qbe/infer_whyx.hpp"
#include "qbe/synth.hpp"

using namespace qbe;
using fixtures::code_of;

namespace {

KExample larger_query_example() {
    auto db = std::make_shared<const AnnotatedDatabase>(load_database_dir(fixtures::path("larger_query")));
    return make_example(db, parse_examples(read_file(fixtures::path("larger_query/examples.txt"))));
}

// All two-atom queries over R with head (x, y), terms drawn from a few
// variables and every constant of the database.
std::vector<ConjunctiveQuery> all_two_atom_queries(const AnnotatedDatabase& db) {
    std::vector<Term> pool;
    for (const char* v : {"x", "y", "z1", "z2", "z3", "z4"}) pool.push_back(Term::variable(v));
    std::set<std::string> constants;
    for (const auto& row : db.rows("R")) constants.insert(row.values.begin(), row.values.end());
    for (const auto& c : constants) pool.push_back(Term::constant(c));
    std::vector<ConjunctiveQuery> out;
    for (const auto& a : pool)
        for (const auto& b : pool)
            for (const auto& c : pool)
                for (const auto& d : pool) {
                    ConjunctiveQuery q;
                    q.head = {"ans", {Term::variable("x"), Term::variable("y")}};
                    q.body = {{"R", {a, b}}, {"R", {c, d}}};
                    bool has_x = false, has_y = false;
                    for (const auto& t : {a, b, c, d}) {
                        has_x = has_x || (t.is_variable() && t.text == "x");
                        has_y = has_y || (t.is_variable() && t.text == "y");
                    }
                    if (has_x && has_y) out.push_back(std::move(q));
                }
    return out;
}

}  // namespace

TEST_CASE("size bound") {
    const auto ex = fixtures::trip_example("examples_why.txt");
    CHECK(why_size_bound(ex) == 5);
    CHECK(why_size_bound(larger_query_example()) == 3);
}

TEST_CASE("the trip Why(X) example gives back the intended query") {
    const auto ex = fixtures::trip_example("examples_why.txt");
    WhyStats stats;
    const auto cands = find_consistent_whyx(ex, {}, &stats);
    REQUIRE_FALSE(cands.empty());
    CHECK(stats.subgraphs > 0);
    for (const auto& q : cands) {
        CAPTURE(format_query(q));
        CHECK(oracle::consistent(q, ex));
        CHECK(q.body.size() <= why_size_bound(ex));
    }
    const auto fitted = whyx_tight_fit(cands, ex);
    REQUIRE_FALSE(fitted.empty());
    CHECK(canonical_text(select_output_query(fitted)) == fixtures::q_real_text());
    CHECK(exhaustive_whyx_oracle(ex).has_value());
}

TEST_CASE("an instance that needs more atoms than the largest explanation") {
    const auto ex = larger_query_example();
    REQUIRE(ex.kind == SemiringKind::WhyX);
    std::size_t consistent_pairs = 0;
    for (const auto& q : all_two_atom_queries(*ex.input)) consistent_pairs += oracle::consistent(q, ex);
    CHECK(consistent_pairs == 0);

    const auto three = parse_query("ans(x, y) :- R(x, z1), R(z2, y), R(z3, z4).");
    CHECK(oracle::consistent(three, ex));

    const auto found = find_consistent_whyx(ex);
    REQUIRE_FALSE(found.empty());
    for (const auto& q : found) {
        CHECK(q.body.size() == 3);
        CHECK(oracle::consistent(q, ex));
    }
    const auto oracle_q = exhaustive_whyx_oracle(ex);
    REQUIRE(oracle_q.has_value());
    CHECK(oracle_q->body.size() == 3);
}

TEST_CASE("Trio(X) coefficients are enforced") {
    auto db = fixtures::trip_db();
    // The same explanation twice: Q_real derives a.b.c only once.
    const auto ex = make_example(db, parse_examples("Argentina,Brazil\n2*a.c.b\n"));
    REQUIRE(ex.kind == SemiringKind::TrioX);
    CHECK_FALSE(oracle::consistent(parse_query(fixtures::q_real_text()), ex));
    for (const auto& q : find_consistent_triox(ex)) {
        CAPTURE(format_query(q));
        CHECK(oracle::consistent(q, ex));
    }
}

TEST_CASE("PosBool and B[X] entry points") {
    const auto why = fixtures::trip_example("examples_why.txt", SemiringKind::PosBool);
    const auto pb = find_consistent_posbool(why);
    REQUIRE_FALSE(pb.empty());
    for (const auto& q : pb) CHECK(oracle::consistent(q, why));

    const auto bx = fixtures::trip_example("examples_nx.txt");
    REQUIRE(bx.kind == SemiringKind::BX);
    const auto found = find_consistent_bx(bx);
    REQUIRE_FALSE(found.empty());
    for (const auto& q : found) CHECK(oracle::consistent(q, bx));

    CHECK(code_of([&] { find_consistent_whyx(bx); }) == ErrorCode::KindMismatch);
}

TEST_CASE("agreement with the exhaustive oracle on random instances") {
    Rng rng(17);
    SmallExampleSpec spec;
    spec.kind = SemiringKind::WhyX;
    spec.max_degree = 3;
    int solvable = 0, unsolvable = 0;
    for (int i = 0; i < 40;) {
        auto ex = random_small_example(spec, rng);
        if (!ex) continue;
        ++i;
        const auto found = find_consistent_whyx(*ex);
        const auto reference = exhaustive_whyx_oracle(*ex);
        CHECK(found.empty() == !reference.has_value());
        for (const auto& q : found) {
            CHECK(oracle::consistent(q, *ex));
            CHECK(q.body.size() <= why_size_bound(*ex));
        }
        (found.empty() ? unsolvable : solvable) += 1;
    }
    CHECK(solvable > 0);
    CHECK(unsolvable > 0);
}
