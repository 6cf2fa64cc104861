#include <doctest.h>

#include "fixtures.hpp"
#include "oracle.hpp"
#include "qbe/infer_nx.hpp"
#include "qbe/synth.hpp"

using namespace qbe;
using fixtures::code_of;

TEST_CASE("pairs and the seed heuristic on the trip example") {
    const auto ex = fixtures::trip_example("examples_nx.txt", SemiringKind::NX);
    const auto pairs = split_pairs(ex);
    REQUIRE(pairs.size() == 3);
    // a.c.e.f sorts before a^2.b.c.
    CHECK(format_monomial(ex.output[0].provenance.monomials[pairs[0].monomial]) == "a.c.e.f");
    CHECK(distinct_values(ex, pairs[0]) == 4);
    CHECK(distinct_values(ex, pairs[1]) == 3);
    CHECK(distinct_values(ex, pairs[2]) == 5);
    CHECK(pick_seed_pair(ex) == std::pair<std::size_t, std::size_t>{0, 2});
}

TEST_CASE("cover graph between the two Argentina-Brazil explanations") {
    const auto ex = fixtures::trip_example("examples_nx.txt", SemiringKind::NX);
    const auto& row = ex.output[0];
    const auto& fcea = row.provenance.monomials[0];
    const auto& a2bc = row.provenance.monomials[1];
    const auto g = build_cover_graph(row.tuple, a2bc, row.tuple, fcea, *ex.input);
    CHECK(g.left == std::vector<Annotation>{"a", "a", "b", "c"});
    CHECK(g.right == std::vector<Annotation>{"a", "c", "e", "f"});
    CHECK(g.k == 2);
    // Three ways to cover both head attributes.
    CHECK(enumerate_covering_matchings(g).size() == 3);

    const Monomial cubic = parse_monomial("a.b.c");
    CHECK(code_of([&] { build_cover_graph(row.tuple, cubic, row.tuple, fcea, *ex.input); }) ==
          ErrorCode::DegreeMismatch);
}

TEST_CASE("the trip N[X] example yields the general query and only consistent candidates") {
    const auto ex = fixtures::trip_example("examples_nx.txt", SemiringKind::NX);
    NxOptions opts;
    opts.exhaustive = true;
    InferStats stats;
    const auto all = find_consistent_nx(ex, opts, &stats);
    REQUIRE_FALSE(all.empty());
    CHECK(stats.selections > 0);
    for (const auto& q : all) {
        CAPTURE(format_query(q));
        CHECK(q.body.size() == 4);
        CHECK(oracle::consistent(q, ex));
    }
    const auto general = parse_query("ans(x, y) :- route(x, z), route(w, y), route(t, r), route(k, l).");
    bool found = false;
    for (const auto& q : all) found = found || canonical_text(q) == canonical_text(general);
    CHECK(found);
    CHECK(find_consistent_nx(ex).has_value());
}

TEST_CASE("kind and budget guards") {
    const auto why = fixtures::trip_example("examples_why.txt");
    CHECK(code_of([&] { find_consistent_nx(why, NxOptions{}); }) == ErrorCode::KindMismatch);

    const auto ex = fixtures::trip_example("examples_nx.txt", SemiringKind::NX);
    NxOptions tight;
    tight.exhaustive = true;
    tight.limits.selection_budget = 0;
    CHECK(code_of([&] { find_consistent_nx(ex, tight); }) == ErrorCode::LimitExceeded);

    NxOptions late;
    late.limits.deadline = std::chrono::steady_clock::now() - std::chrono::seconds(1);
    CHECK(code_of([&] { find_consistent_nx(ex, late); }) == ErrorCode::LimitExceeded);

    Limits small;
    small.naive_cap = 10;
    CHECK(code_of([&] { naive_find_consistent(ex, small); }) == ErrorCode::InstanceTooLarge);
}

TEST_CASE("degree mismatch across examples means no query") {
    auto db = fixtures::trip_db();
    const auto ex = make_example(db, parse_examples("Argentina,Brazil\na\n\nBrazil,Bolivia\nb.c\n"),
                                 SemiringKind::NX);
    CHECK(find_consistent_nx(ex, NxOptions{}).empty());
    CHECK_FALSE(naive_find_consistent(ex).has_value());
}

TEST_CASE("agreement with the permutation oracle on random instances") {
    Rng rng(3);
    SmallExampleSpec spec;
    spec.max_degree = 3;
    int solvable = 0, unsolvable = 0;
    for (int i = 0; i < 60;) {
        auto ex = random_small_example(spec, rng);
        if (!ex) continue;
        ++i;
        const auto fast = find_consistent_nx(*ex, NxOptions{});
        const auto slow = naive_find_consistent(*ex);
        CHECK(fast.empty() == !slow.has_value());
        if (!fast.empty()) {
            CHECK(oracle::consistent(fast.front(), *ex));
            ++solvable;
        } else {
            ++unsolvable;
        }
        if (slow) CHECK(oracle::consistent(*slow, *ex));
    }
    CHECK(solvable > 0);
    CHECK(unsolvable > 0);
}
