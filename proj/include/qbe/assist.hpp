#pragma once

#include <memory>
#include <vector>

#include "qbe/relational.hpp"

namespace qbe {

/// The tuples a user has picked so far as the cause of one example tuple.
struct ExplanationDraft {
    Tuple example_tuple;
    std::vector<Annotation> chosen;  // in pick order, repeats allowed
};

struct Proposal {
    Annotation annotation;
    std::string relation;
    std::vector<std::size_t> shared_positions;  // positions whose value is shared
};

/// Tuples sharing a value with the example tuple, plus (once something is
/// chosen) tuples sharing a value with a chosen tuple. Chosen tuples stay
/// proposable. Ordered by relation, then by number of shared values
/// (descending), then by token.
std::vector<Proposal> propose_explanation_tuples(const ExplanationDraft& draft,
                                                 const AnnotatedDatabase& db);
std::vector<Annotation> proposed_annotations(const ExplanationDraft& draft,
                                             const AnnotatedDatabase& db);

struct ExampleDrafts {
    Tuple tuple;
    std::vector<ExplanationDraft> drafts;  // completed drafts only
};

/// Each draft becomes a monomial; identical drafts add up to a coefficient.
/// The semiring is detected from the drafts.
/// Throws EmptyExplanations, UnknownAnnotation.
KExample compile_explanations(const std::vector<ExampleDrafts>& examples,
                              std::shared_ptr<const AnnotatedDatabase> db);

}  // namespace qbe
