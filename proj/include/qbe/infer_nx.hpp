#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <optional>
#include <utility>
#include <vector>

#include "qbe/relational.hpp"

namespace qbe {

/// Search budgets shared by every inference path.
struct Limits {
    std::uint64_t selection_budget = 1'000'000;  // cover selections per seed pair / sub-graphs per step
    std::uint64_t naive_cap = 1'000'000;         // n!^m guard for the permutation oracle
    std::uint64_t oracle_cap = 200'000;          // NX expansions tried by the Why oracle
    std::optional<std::chrono::steady_clock::time_point> deadline;

    /// Throws LimitExceeded once the deadline has passed.
    void check_deadline() const;
    static Limits with_timeout(std::chrono::milliseconds timeout);
};

struct InferStats {
    std::uint64_t selections = 0;          // cover selections / sub-graphs enumerated
    std::uint64_t candidates = 0;          // queries built
    std::uint64_t verified = 0;            // candidates passing verification
    std::uint64_t consistency_checks = 0;  // is_consistent-style checks (lattice included)

    InferStats& operator+=(const InferStats& o) {
        selections += o.selections;
        candidates += o.candidates;
        verified += o.verified;
        consistency_checks += o.consistency_checks;
        return *this;
    }
};

/// One (output tuple, monomial) pair of an example; coefficients stay attached.
struct ExamplePair {
    std::size_t row = 0;
    std::size_t monomial = 0;
};

std::vector<ExamplePair> split_pairs(const KExample& ex);

/// Distinct constants in the pair's tuple and in the tuples of its monomial.
std::size_t distinct_values(const KExample& ex, const ExamplePair& pair);

/// Indices (into split_pairs) of the two pairs with the most distinct values,
/// ties broken by position; returned ascending. A single pair is paired with itself.
std::pair<std::size_t, std::size_t> pick_seed_pair(const KExample& ex);

struct CoverEdge {
    std::size_t left = 0;
    std::size_t right = 0;
    /// witnesses[j]: input positions A' with t1[j] = left[A'] and t2[j] = right[A'].
    std::vector<std::vector<std::size_t>> witnesses;

    bool covers(std::size_t attribute) const { return !witnesses[attribute].empty(); }
    std::vector<std::size_t> label() const;
};

/// Bipartite graph between the annotation occurrences of two monomials
/// (an exponent e yields e nodes).
struct CoverGraph {
    std::vector<Annotation> left, right;
    std::vector<std::string> left_relation, right_relation;
    std::vector<CoverEdge> edges;  // sorted by (left, right)
    std::size_t k = 0;

    const CoverEdge* find(std::size_t left, std::size_t right) const;
};

/// Throws DegreeMismatch when the monomials differ in degree.
CoverGraph build_cover_graph(const Tuple& t1, const Monomial& m1, const Tuple& t2,
                             const Monomial& m2, const AnnotatedDatabase& db);

struct CoverSelection {
    std::vector<std::size_t> edges;                         // indices into CoverGraph::edges, ascending
    std::vector<std::pair<std::size_t, std::size_t>> cover;  // per head attribute: (edge index, position)
};

/// Node-disjoint edge sets of size <= k with every attribute assignment that
/// uses each chosen edge and covers all k attributes. Occurrences of the same
/// annotation are interchangeable, so only one representative per symmetry
/// class is produced. Order: edge count, then edge indices, then assignment.
/// `visit` returns false to stop. Throws LimitExceeded past the budget.
void enumerate_covering_matchings(const CoverGraph& g, const Limits& limits, InferStats& stats,
                                  const std::function<bool(const CoverSelection&)>& visit);
std::vector<CoverSelection> enumerate_covering_matchings(const CoverGraph& g,
                                                         const Limits& limits = {});

/// One atom per left occurrence in left order: head variables at witness
/// positions, fresh variables elsewhere.
ConjunctiveQuery build_query_from_matching(const CoverGraph& g, const CoverSelection& sel,
                                           const AnnotatedDatabase& db);

/// Head bound to t; derivations whose image bag is M must number >= M's coefficient.
bool verify_candidate(const ConjunctiveQuery& q, const Tuple& t, const Monomial& m,
                      const AnnotatedDatabase& db);

/// Permutation-based exhaustive search; test oracle only.
/// Throws InstanceTooLarge when n!^m exceeds limits.naive_cap.
std::optional<ConjunctiveQuery> naive_find_consistent(const KExample& ex, const Limits& limits = {});

struct NxOptions {
    bool exhaustive = false;  // return every verified candidate instead of the first
    std::size_t max_candidates = 0;  // exhaustive mode: stop after this many (0 = no limit)
    std::optional<std::pair<std::size_t, std::size_t>> seed;  // override pick_seed_pair
    Limits limits;
};

/// Verified candidates (at most one unless exhaustive), deduplicated by
/// canonical text in enumeration order. Empty means no consistent query.
std::vector<ConjunctiveQuery> find_consistent_nx(const KExample& ex, const NxOptions& options,
                                                 InferStats* stats = nullptr);
std::optional<ConjunctiveQuery> find_consistent_nx(const KExample& ex);

}  // namespace qbe
