#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "qbe/infer_nx.hpp"
#include "qbe/minimize.hpp"

namespace qbe {

/// An atom that contributes to the head: per position, the set of head
/// attributes it carries (bit j = attribute j); 0 marks a fresh variable.
struct ContributingAtom {
    std::string relation;
    std::vector<std::uint64_t> mask;

    auto operator<=>(const ContributingAtom&) const = default;
};

/// Candidate of the Why(X) search: contributing atoms plus, per relation, the
/// number of atoms made only of fresh variables.
struct WhyCandidate {
    std::vector<ContributingAtom> contributing;  // sorted
    std::map<std::string, std::size_t> free;

    /// Canonical text of the contributing part, the map key.
    std::string key() const;
    std::size_t size() const;
    ConjunctiveQuery to_query(const Schema& schema, std::size_t k) const;
};

/// k + r*(n-1): k head attributes, r relations in the monomials, n largest support.
std::size_t why_size_bound(const KExample& ex);

struct WhyOptions {
    Limits limits;
};

struct WhyStats {
    std::uint64_t subgraphs = 0;
    std::uint64_t candidates = 0;       // queries put into the map
    std::uint64_t over_bound = 0;       // dropped by the size bound
    std::uint64_t final_rejected = 0;   // dropped by the closing consistency check
    std::size_t peak_map_size = 0;
};

/// Example-by-example expansion of candidate queries (one per contributing
/// part). Works for Why(X), PosBool and Trio(X) examples; for Trio(X) the
/// coefficient is also checked at each step. Empty result: nothing consistent.
std::vector<ConjunctiveQuery> find_consistent_whyx(const KExample& ex, const WhyOptions& options = {},
                                                   WhyStats* stats = nullptr);

/// Drops fresh-only atoms that are not needed, then minimizes by equatings.
std::vector<ConjunctiveQuery> whyx_tight_fit(const std::vector<ConjunctiveQuery>& candidates,
                                             const KExample& ex, const LatticeOptions& options = {});

/// Tries every N[X] expansion of the monomials up to the size bound and asks
/// the N[X] search for each; test oracle only. Throws InstanceTooLarge.
std::optional<ConjunctiveQuery> exhaustive_whyx_oracle(const KExample& ex, const Limits& limits = {});

std::vector<ConjunctiveQuery> find_consistent_triox(const KExample& ex, const WhyOptions& options = {});
std::vector<ConjunctiveQuery> find_consistent_bx(const KExample& ex, const Limits& limits = {});
std::vector<ConjunctiveQuery> find_consistent_posbool(const KExample& ex,
                                                      const WhyOptions& options = {});

}  // namespace qbe
