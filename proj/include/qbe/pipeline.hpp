#pragma once

#include <optional>
#include <vector>

#include "qbe/infer_whyx.hpp"

namespace qbe {

struct InferOptions {
    Limits limits;
    std::size_t max_nx_candidates = 32;  // verified N[X]/B[X] candidates fed to minimization
    bool memoize_lattice = true;
};

struct InferResult {
    ConjunctiveQuery query;                   // canonical form
    std::vector<ConjunctiveQuery> candidates;  // minimized alternatives, canonical, sorted by text
    SemiringKind kind = SemiringKind::NX;
    InferStats stats;
    double millis = 0;
};

/// Full pipeline: search by semiring, minimize, select.
/// Throws NoConsistentQuery, LimitExceeded.
InferResult infer(const KExample& ex, const InferOptions& options = {});

}  // namespace qbe
