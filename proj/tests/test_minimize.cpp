#include <doctest.h>

#include "fixtures.hpp"
#include "oracle.hpp"
#include "qbe/minimize.hpp"

using namespace qbe;
using fixtures::code_of;

namespace {

ConjunctiveQuery general_query() {
    return parse_query("ans(x, y) :- route(x, z), route(w, y), route(t, r), route(k, l).");
}

// Every single variable/variable or variable/constant equating.
std::vector<EquatingSet> one_step_extensions(const ConjunctiveQuery& q, const AnnotatedDatabase& db) {
    std::set<std::string> constants;
    for (const auto& rel : db.schema().relations()) {
        for (const auto& row : db.rows(rel.first)) constants.insert(row.values.begin(), row.values.end());
    }
    const auto vars = q.variables();
    std::vector<EquatingSet> out;
    for (std::size_t i = 0; i < vars.size(); ++i) {
        for (std::size_t j = i + 1; j < vars.size(); ++j) {
            EquatingSet h;
            h.unite(vars[i], vars[j]);
            out.push_back(h);
        }
        for (const auto& c : constants) {
            EquatingSet h;
            h.pin(vars[i], c);
            out.push_back(h);
        }
    }
    return out;
}

}  // namespace

TEST_CASE("equating sets stay closed and reject constant clashes") {
    EquatingSet h;
    CHECK(h.empty());
    CHECK(h.unite("x", "y"));
    CHECK(h.unite("y", "z"));
    CHECK(h.same_class("x", "z"));
    CHECK(h.pin("z", "Bolivia"));
    CHECK(h.constant_of("x") == "Bolivia");
    CHECK_FALSE(h.pin("x", "Peru"));
    CHECK(h.pin("w", "Peru"));
    CHECK_FALSE(h.unite("w", "x"));
    CHECK_FALSE(h.same_class("w", "x"));

    EquatingSet g;
    g.unite("x", "z");
    CHECK(h.implies(g));
    CHECK_FALSE(g.implies(h));

    EquatingSet a, b;
    a.unite("p", "q");
    a.unite("q", "r");
    b.unite("r", "p");
    b.unite("q", "p");
    CHECK(a.key() == b.key());
}

TEST_CASE("homomorphism application keeps head variables") {
    const auto q = general_query();
    EquatingSet h;
    h.unite("z", "w");
    h.unite("x", "l");
    h.pin("t", "Bolivia");
    const auto image = apply_homomorphism(q, h);
    CHECK(image.head.terms[0].text == "x");
    CHECK(image.body[0].terms[1].text == "w");
    CHECK(image.body[3].terms[1].text == "x");
    CHECK_FALSE(image.body[2].terms[0].is_variable());
    CHECK(canonical_text(image) ==
          canonical_text(parse_query("ans(x, y) :- route(x, w), route(w, y), route('Bolivia', r), route(k, x).")));
}

TEST_CASE("the general trip query minimizes to the intended one") {
    const auto ex = fixtures::trip_example("examples_nx.txt", SemiringKind::NX);
    const auto q = general_query();
    REQUIRE(is_consistent(q, ex));

    const auto cands = candidate_equatings(q, ex);
    CHECK_FALSE(cands.empty());

    LatticeStats stats;
    const auto results = explore_equating_lattice(q, ex, {}, &stats);
    REQUIRE_FALSE(results.empty());
    CHECK(stats.maximal.size() == results.size());
    bool found = false;
    for (const auto& r : results) {
        CAPTURE(format_query(r));
        CHECK(oracle::consistent(r, ex));
        found = found || canonical_text(r) == fixtures::q_real_text();
    }
    CHECK(found);
    CHECK(canonical_text(select_output_query(results)) == fixtures::q_real_text());

    LatticeOptions plain;
    plain.memoize = false;
    LatticeStats plain_stats;
    const auto again = explore_equating_lattice(q, ex, plain, &plain_stats);
    std::set<std::string> a, b;
    for (const auto& r : results) a.insert(canonical_text(r));
    for (const auto& r : again) b.insert(canonical_text(r));
    CHECK(a == b);
    CHECK(plain_stats.pruned_supersets == 0);
    CHECK(plain_stats.consistency_checks >= stats.consistency_checks);
}

TEST_CASE("results are locally maximal and pruned sets really fail") {
    const auto ex = fixtures::trip_example("examples_nx.txt", SemiringKind::NX);
    const auto q = general_query();
    LatticeStats stats;
    const auto results = explore_equating_lattice(q, ex, {}, &stats);
    for (const auto& r : results) {
        for (const auto& h : one_step_extensions(r, *ex.input)) {
            const auto bigger = apply_homomorphism(r, h);
            if (canonical_text(bigger) == canonical_text(r)) continue;
            CAPTURE(format_query(bigger));
            CHECK_FALSE(oracle::consistent(bigger, ex));
        }
    }
    for (const auto& h : stats.skipped) CHECK_FALSE(oracle::consistent(apply_homomorphism(q, h), ex));
}

TEST_CASE("containment mappings") {
    const auto real = parse_query(fixtures::q_real_text());
    const auto general = general_query();
    CHECK(containment_mapping(general, real, false));
    CHECK(containment_mapping(general, real, true));
    CHECK_FALSE(containment_mapping(real, general, false));

    const auto two = parse_query("ans(x) :- route(x, y), route(y, z).");
    const auto one = parse_query("ans(x) :- route(x, y), route(x, y).");
    CHECK(containment_mapping(two, two, true));
    CHECK_FALSE(containment_mapping(one, two, true));
}

TEST_CASE("syntactic minimality") {
    CHECK(is_syntactically_minimal(parse_query(fixtures::q_real_text())));
    CHECK_FALSE(is_syntactically_minimal(general_query()));
    CHECK_FALSE(is_syntactically_minimal(parse_query("ans(x) :- route(x, y), route(x, z).")));
    CHECK(is_syntactically_minimal(parse_query("ans(x) :- route(x, y), route(y, x).")));
}

TEST_CASE("output selection") {
    const auto real = parse_query(fixtures::q_real_text());
    const auto redundant = parse_query("ans(x, y) :- route(x, z), route(z, 'Bolivia'), route('Bolivia', 'Argentina'), route('Argentina', y), route(x, q).");
    const auto loose = parse_query("ans(x, y) :- route(x, z), route(w, 'Bolivia'), route('Bolivia', 'Argentina'), route('Argentina', y).");
    CHECK(canonical_text(select_output_query({redundant, loose, real})) == fixtures::q_real_text());
    CHECK(code_of([] { select_output_query({}); }) == ErrorCode::EmptyCandidates);
}
