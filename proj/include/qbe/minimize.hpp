#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "qbe/infer_nx.hpp"
#include "qbe/relational.hpp"

namespace qbe {

/// A homomorphism given as a partition of variables, each class optionally
/// pinned to a constant. Kept transitively closed.
class EquatingSet {
public:
    /// False (and no change) if the classes carry different constants.
    bool unite(const std::string& a, const std::string& b);
    /// False (and no change) if the class already carries another constant.
    bool pin(const std::string& var, const std::string& constant);

    std::string find(const std::string& var) const;
    std::optional<std::string> constant_of(const std::string& var) const;
    bool same_class(const std::string& a, const std::string& b) const { return find(a) == find(b); }

    /// True if every equating of `other` also holds here.
    bool implies(const EquatingSet& other) const;
    bool empty() const { return parent_.empty() && pinned_.empty(); }
    /// Stable text form, used as a memo key.
    std::string key() const;
    /// Non-trivial classes and pins as readable pairs, for reports.
    std::vector<std::pair<std::string, std::string>> pairs() const;

private:
    mutable std::map<std::string, std::string> parent_;
    std::map<std::string, std::string> pinned_;  // root -> constant
};

/// Replaces each variable by its class representative (a head variable when the
/// class has one, else the smallest name) or by the pinned constant.
ConjunctiveQuery apply_homomorphism(const ConjunctiveQuery& q, const EquatingSet& h);

/// A single candidate step of the lattice.
struct Equating {
    std::string var;
    std::string other;     // variable name, or constant value if `constant`
    bool constant = false;

    friend bool operator==(const Equating&, const Equating&) = default;
};

/// Equatings whose observed values (over the witnessing derivations of every
/// example monomial) meet in every case.
std::vector<Equating> candidate_equatings(const ConjunctiveQuery& q, const KExample& ex);

struct LatticeOptions {
    bool memoize = true;
    std::size_t skipped_sample = 1000;  // how many pruned supersets to keep for auditing
    Limits limits;
};

struct LatticeStats {
    std::uint64_t consistency_checks = 0;
    std::uint64_t memo_hits = 0;
    std::uint64_t pruned_supersets = 0;
    std::vector<EquatingSet> skipped;  // sample of pruned supersets
    std::vector<EquatingSet> maximal;  // equating set behind each result
};

/// Greedy maximal consistent equating sets, one walk per not-yet-covered
/// starting equating. Supersets of known-inconsistent sets are skipped without
/// evaluation. Returns {q} when no equating is consistent.
std::vector<ConjunctiveQuery> explore_equating_lattice(const ConjunctiveQuery& q, const KExample& ex,
                                                       const LatticeOptions& options = {},
                                                       LatticeStats* stats = nullptr);

/// Homomorphism from `from` onto `to` that maps head to head and body atoms to
/// body atoms; with `onto` every atom of `to` must be hit.
bool containment_mapping(const ConjunctiveQuery& from, const ConjunctiveQuery& to, bool onto);

/// No proper sub-body admits a head-preserving endomorphism.
bool is_syntactically_minimal(const ConjunctiveQuery& q);

/// Syntactically minimal candidates if any, then fewest distinct variables,
/// then smallest canonical text. Returned in canonical form.
/// Throws EmptyCandidates.
ConjunctiveQuery select_output_query(const std::vector<ConjunctiveQuery>& candidates);

}  // namespace qbe
