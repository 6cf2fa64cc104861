#pragma once

#include <compare>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "qbe/provenance.hpp"

namespace qbe {

using Value = std::string;
using Tuple = std::vector<Value>;

std::string format_tuple(const Tuple& tuple);  // comma separated

class Schema {
public:
    /// Throws SchemaMismatch on duplicate relation/attribute names or arity 0.
    void add(const std::string& relation, std::vector<std::string> attributes);

    bool contains(std::string_view relation) const;
    /// Throws UnknownRelation.
    const std::vector<std::string>& attributes(std::string_view relation) const;
    std::size_t arity(std::string_view relation) const { return attributes(relation).size(); }
    const std::map<std::string, std::vector<std::string>, std::less<>>& relations() const {
        return relations_;
    }

    friend bool operator==(const Schema&, const Schema&) = default;

private:
    std::map<std::string, std::vector<std::string>, std::less<>> relations_;
};

struct Row {
    Tuple values;
    Annotation annotation;

    friend bool operator==(const Row&, const Row&) = default;
};

/// Where an annotated tuple lives.
struct RowRef {
    std::string relation;
    std::size_t row = 0;
};

/// An abstractly tagged database: every tuple carries a globally unique token.
class AnnotatedDatabase {
public:
    AnnotatedDatabase() = default;
    explicit AnnotatedDatabase(Schema schema);

    /// Throws UnknownRelation, SchemaMismatch (arity) or DuplicateAnnotation.
    void insert(std::string_view relation, Tuple values, Annotation annotation);

    const Schema& schema() const { return schema_; }
    const std::vector<Row>& rows(std::string_view relation) const;
    std::size_t size() const { return by_annotation_.size(); }

    bool contains(const Annotation& annotation) const;
    /// Throws UnknownAnnotation.
    const RowRef& locate(const Annotation& annotation) const;
    const Tuple& tuple_of(const Annotation& annotation) const;
    const std::string& relation_of(const Annotation& annotation) const {
        return locate(annotation).relation;
    }

    /// Row indices of `relation` holding `value` at `position`.
    const std::vector<std::size_t>& rows_with(std::string_view relation, std::size_t position,
                                              const Value& value) const;

    /// Every annotation, in relation then row order.
    std::vector<Annotation> annotations() const;

    friend bool operator==(const AnnotatedDatabase& a, const AnnotatedDatabase& b) {
        return a.schema_ == b.schema_ && a.data_.size() == b.data_.size() &&
               std::equal(a.data_.begin(), a.data_.end(), b.data_.begin(),
                          [](const auto& x, const auto& y) {
                              return x.first == y.first && x.second.rows == y.second.rows;
                          });
    }

private:
    struct RelationData {
        std::vector<Row> rows;
        std::vector<std::unordered_map<Value, std::vector<std::size_t>>> index;
    };
    const RelationData& data(std::string_view relation) const;

    Schema schema_;
    std::map<std::string, RelationData, std::less<>> data_;
    std::unordered_map<Annotation, RowRef> by_annotation_;
};

struct Term {
    enum class Kind { Variable, Constant };
    Kind kind = Kind::Variable;
    std::string text;

    static Term variable(std::string name) { return {Kind::Variable, std::move(name)}; }
    static Term constant(std::string value) { return {Kind::Constant, std::move(value)}; }
    bool is_variable() const { return kind == Kind::Variable; }

    auto operator<=>(const Term&) const = default;
};

struct Atom {
    std::string relation;
    std::vector<Term> terms;

    auto operator<=>(const Atom&) const = default;
};

struct ConjunctiveQuery {
    Atom head;
    std::vector<Atom> body;

    /// Distinct variables in first-occurrence order (head first, then body).
    std::vector<std::string> variables() const;
    std::set<std::string> head_variables() const;

    friend bool operator==(const ConjunctiveQuery&, const ConjunctiveQuery&) = default;
};

/// Checks head-variable safety, non-empty body, and (with a schema) atom arities.
void validate_query(const ConjunctiveQuery& query, const Schema* schema = nullptr);

/// Grammar: `name(t, ...) :- rel(t, ...), ... .` with bare-identifier variables
/// and single-quoted constants (`''` escapes a quote).
ConjunctiveQuery parse_query(std::string_view text, const Schema* schema = nullptr);

/// Renames variables to v1..vn in first-occurrence order; body order is kept.
std::string format_query(const ConjunctiveQuery& query);

/// Reorders the body deterministically (greedy, following shared terms from
/// the head) and renames variables, so isomorphic queries coincide.
ConjunctiveQuery canonical_form(const ConjunctiveQuery& query);
std::string canonical_text(const ConjunctiveQuery& query);

/// Number of distinct variables.
std::size_t unique_variable_count(const ConjunctiveQuery& query);

inline constexpr std::uint64_t kDefaultDerivationCap = 10'000'000;

struct Derivation {
    std::vector<Annotation> images;         // per body atom
    std::map<std::string, Value> binding;   // variable -> constant

    friend bool operator==(const Derivation&, const Derivation&) = default;
};

/// All derivations (optionally only those producing `target`), sorted by the
/// annotation assignment. Throws DerivationExplosion past `cap`.
std::vector<Derivation> enumerate_derivations(const ConjunctiveQuery& query,
                                              const AnnotatedDatabase& db,
                                              const Tuple* target = nullptr,
                                              std::uint64_t cap = kDefaultDerivationCap);

struct OutputRow {
    Tuple tuple;
    ProvenancePolynomial provenance;  // canonical N[X]
};

/// Provenance-aware evaluation into N[X]; rows sorted by tuple.
std::vector<OutputRow> evaluate_with_provenance(const ConjunctiveQuery& query,
                                                const AnnotatedDatabase& db,
                                                std::uint64_t cap = kDefaultDerivationCap);

/// Output tuples only; never enumerates derivations of atoms that cannot
/// change the head image, so fresh atoms stay cheap.
std::set<Tuple> evaluate_support(const ConjunctiveQuery& query, const AnnotatedDatabase& db);

/// Number of derivations producing `target` whose image bag equals the
/// monomial's factor multiset, saturating at `limit`.
std::uint64_t count_bag_derivations(const ConjunctiveQuery& query, const Tuple& target,
                                    const Monomial& bag, const AnnotatedDatabase& db,
                                    std::uint64_t limit);

/// Number of derivations producing `target` whose image set equals `support`
/// (each token used at least once), saturating at `limit`.
std::uint64_t count_set_derivations(const ConjunctiveQuery& query, const Tuple& target,
                                    const std::vector<Annotation>& support,
                                    const AnnotatedDatabase& db, std::uint64_t limit);

struct ExampleRow {
    Tuple tuple;
    ProvenancePolynomial provenance;
};

/// Input database paired with explained output tuples.
struct KExample {
    std::shared_ptr<const AnnotatedDatabase> input;
    std::vector<ExampleRow> output;
    SemiringKind kind = SemiringKind::NX;

    /// Throws UnknownAnnotation, SchemaMismatch (mixed arity), KindMismatch, ShapeViolation.
    void validate() const;
    std::size_t arity() const { return output.empty() ? 0 : output.front().tuple.size(); }
};

/// Does `monomial` appear in the `kind`-projection of query(input)(tuple)?
bool monomial_realized(const ConjunctiveQuery& query, const Tuple& tuple, const Monomial& monomial,
                       const AnnotatedDatabase& db, SemiringKind kind);

/// Query output dominates every example polynomial under the natural order.
bool is_consistent(const ConjunctiveQuery& query, const KExample& example);

/// Derivations producing `target` that realize `monomial` under `kind`: image
/// bag equal to the monomial when exponents count, image set equal to its
/// support otherwise. Stops after `cap` derivations.
std::vector<Derivation> witnessing_derivations(const ConjunctiveQuery& query, const Tuple& target,
                                               const Monomial& monomial,
                                               const AnnotatedDatabase& db, SemiringKind kind,
                                               std::uint64_t cap);

/// Repeated consistency checks against one example; the monomial that failed
/// last is tried first next time.
class ConsistencyChecker {
public:
    explicit ConsistencyChecker(const KExample& example);
    bool operator()(const ConjunctiveQuery& query);
    std::uint64_t checks() const { return checks_; }

private:
    const KExample& example_;
    std::vector<std::pair<std::size_t, std::size_t>> order_;  // (row, monomial)
    std::uint64_t checks_ = 0;
};

}  // namespace qbe
