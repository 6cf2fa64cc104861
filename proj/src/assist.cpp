#include "qbe/assist.hpp"

#include <algorithm>
#include <set>

namespace qbe {

std::vector<Proposal> propose_explanation_tuples(const ExplanationDraft& draft,
                                                 const AnnotatedDatabase& db) {
    std::set<Value> reference(draft.example_tuple.begin(), draft.example_tuple.end());
    for (const auto& a : draft.chosen) {
        const auto& t = db.tuple_of(a);
        reference.insert(t.begin(), t.end());
    }
    std::vector<Proposal> out;
    for (const auto& [relation, attributes] : db.schema().relations()) {
        std::set<std::size_t> hit;
        for (const auto& value : reference) {
            for (std::size_t p = 0; p < attributes.size(); ++p) {
                for (std::size_t r : db.rows_with(relation, p, value)) hit.insert(r);
            }
        }
        const auto& rows = db.rows(relation);
        std::vector<Proposal> here;
        for (std::size_t r : hit) {
            Proposal prop{rows[r].annotation, relation, {}};
            for (std::size_t p = 0; p < attributes.size(); ++p) {
                if (reference.count(rows[r].values[p])) prop.shared_positions.push_back(p);
            }
            here.push_back(std::move(prop));
        }
        std::sort(here.begin(), here.end(), [](const Proposal& a, const Proposal& b) {
            if (a.shared_positions.size() != b.shared_positions.size()) {
                return a.shared_positions.size() > b.shared_positions.size();
            }
            return a.annotation < b.annotation;
        });
        out.insert(out.end(), here.begin(), here.end());
    }
    return out;
}

std::vector<Annotation> proposed_annotations(const ExplanationDraft& draft,
                                             const AnnotatedDatabase& db) {
    std::vector<Annotation> out;
    for (auto& p : propose_explanation_tuples(draft, db)) out.push_back(std::move(p.annotation));
    return out;
}

KExample compile_explanations(const std::vector<ExampleDrafts>& examples,
                              std::shared_ptr<const AnnotatedDatabase> db) {
    if (examples.empty()) throw Error(ErrorCode::EmptyExplanations, "no examples given");
    std::vector<std::vector<Explanation>> explanations;
    for (std::size_t i = 0; i < examples.size(); ++i) {
        std::vector<Explanation> group;
        for (const auto& d : examples[i].drafts) {
            if (d.chosen.empty()) {
                throw Error(ErrorCode::EmptyExplanations,
                            "example " + std::to_string(i) + " has an empty explanation");
            }
            for (const auto& a : d.chosen) db->locate(a);
            group.push_back(d.chosen);
        }
        explanations.push_back(std::move(group));
    }
    KExample ex;
    ex.kind = detect_semiring(explanations);
    ex.input = std::move(db);
    for (std::size_t i = 0; i < examples.size(); ++i) {
        ProvenancePolynomial poly;
        for (const auto& bag : explanations[i]) poly.monomials.push_back(monomial_from_bag(bag));
        poly = canonicalize(poly);
        if (ex.kind != SemiringKind::NX) poly = project(poly, ex.kind);
        ex.output.push_back({examples[i].tuple, std::move(poly)});
    }
    ex.validate();
    return ex;
}

}  // namespace qbe
