#include "qbe/pipeline.hpp"

#include <algorithm>
#include <set>

namespace qbe {

InferResult infer(const KExample& ex, const InferOptions& options) {
    const auto start = std::chrono::steady_clock::now();
    ex.validate();
    InferResult result;
    result.kind = ex.kind;
    LatticeOptions lattice;
    lattice.memoize = options.memoize_lattice;
    lattice.limits = options.limits;

    std::vector<ConjunctiveQuery> minimized;
    switch (ex.kind) {
        case SemiringKind::NX:
        case SemiringKind::BX: {
            NxOptions nx;
            nx.exhaustive = true;
            nx.max_candidates = options.max_nx_candidates;
            nx.limits = options.limits;
            const auto found = find_consistent_nx(ex, nx, &result.stats);
            std::set<std::string> seen;
            for (const auto& q : found) {
                LatticeStats ls;
                for (auto& r : explore_equating_lattice(q, ex, lattice, &ls)) {
                    if (seen.insert(canonical_text(r)).second) minimized.push_back(std::move(r));
                }
                result.stats.consistency_checks += ls.consistency_checks;
            }
            break;
        }
        case SemiringKind::WhyX:
        case SemiringKind::TrioX:
        case SemiringKind::PosBool: {
            WhyOptions why;
            why.limits = options.limits;
            WhyStats ws;
            const auto found = find_consistent_whyx(ex, why, &ws);
            result.stats.selections += ws.subgraphs;
            result.stats.candidates += ws.candidates;
            result.stats.verified += found.size();
            minimized = whyx_tight_fit(found, ex, lattice);
            break;
        }
    }
    if (minimized.empty()) {
        throw Error(ErrorCode::NoConsistentQuery, "no conjunctive query is consistent with the examples");
    }
    result.query = select_output_query(minimized);
    for (const auto& q : minimized) result.candidates.push_back(canonical_form(q));
    std::sort(result.candidates.begin(), result.candidates.end(),
              [](const auto& a, const auto& b) { return format_query(a) < format_query(b); });
    result.millis = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start)
                        .count();
    return result;
}

}  // namespace qbe
