#include <algorithm>
#include <set>

#include "qbe/relational.hpp"

namespace qbe {

std::string format_tuple(const Tuple& tuple) {
    std::string out;
    for (std::size_t i = 0; i < tuple.size(); ++i) {
        if (i) out += ',';
        out += tuple[i];
    }
    return out;
}

void Schema::add(const std::string& relation, std::vector<std::string> attributes) {
    if (relation.empty()) throw Error(ErrorCode::SchemaMismatch, "empty relation name");
    if (attributes.empty()) {
        throw Error(ErrorCode::SchemaMismatch, "relation '" + relation + "' has no attributes");
    }
    std::set<std::string> seen;
    for (const auto& a : attributes) {
        if (!seen.insert(a).second) {
            throw Error(ErrorCode::SchemaMismatch,
                        "duplicate attribute '" + a + "' in relation '" + relation + "'");
        }
    }
    if (!relations_.emplace(relation, std::move(attributes)).second) {
        throw Error(ErrorCode::SchemaMismatch, "duplicate relation '" + relation + "'");
    }
}

bool Schema::contains(std::string_view relation) const {
    return relations_.find(relation) != relations_.end();
}

const std::vector<std::string>& Schema::attributes(std::string_view relation) const {
    auto it = relations_.find(relation);
    if (it == relations_.end()) {
        throw Error(ErrorCode::UnknownRelation, "unknown relation '" + std::string(relation) + "'");
    }
    return it->second;
}

AnnotatedDatabase::AnnotatedDatabase(Schema schema) : schema_(std::move(schema)) {
    for (const auto& [name, attributes] : schema_.relations()) {
        RelationData rel;
        rel.index.resize(attributes.size());
        data_.emplace(name, std::move(rel));
    }
}

void AnnotatedDatabase::insert(std::string_view relation, Tuple values, Annotation annotation) {
    auto it = data_.find(relation);
    if (it == data_.end()) {
        throw Error(ErrorCode::UnknownRelation, "unknown relation '" + std::string(relation) + "'");
    }
    auto& rel = it->second;
    if (values.size() != rel.index.size()) {
        throw Error(ErrorCode::SchemaMismatch,
                    "tuple of arity " + std::to_string(values.size()) + " for relation '" +
                        std::string(relation) + "' of arity " + std::to_string(rel.index.size()));
    }
    if (annotation.empty()) throw Error(ErrorCode::InvalidArgument, "empty annotation");
    if (by_annotation_.count(annotation)) {
        throw Error(ErrorCode::DuplicateAnnotation, "duplicate annotation '" + annotation + "'");
    }
    const std::size_t row = rel.rows.size();
    for (std::size_t p = 0; p < values.size(); ++p) rel.index[p][values[p]].push_back(row);
    by_annotation_.emplace(annotation, RowRef{it->first, row});
    rel.rows.push_back(Row{std::move(values), std::move(annotation)});
}

const AnnotatedDatabase::RelationData& AnnotatedDatabase::data(std::string_view relation) const {
    auto it = data_.find(relation);
    if (it == data_.end()) {
        throw Error(ErrorCode::UnknownRelation, "unknown relation '" + std::string(relation) + "'");
    }
    return it->second;
}

const std::vector<Row>& AnnotatedDatabase::rows(std::string_view relation) const {
    return data(relation).rows;
}

bool AnnotatedDatabase::contains(const Annotation& annotation) const {
    return by_annotation_.count(annotation) != 0;
}

const RowRef& AnnotatedDatabase::locate(const Annotation& annotation) const {
    auto it = by_annotation_.find(annotation);
    if (it == by_annotation_.end()) {
        throw Error(ErrorCode::UnknownAnnotation, "unknown annotation '" + annotation + "'");
    }
    return it->second;
}

const Tuple& AnnotatedDatabase::tuple_of(const Annotation& annotation) const {
    const auto& ref = locate(annotation);
    return data(ref.relation).rows[ref.row].values;
}

const std::vector<std::size_t>& AnnotatedDatabase::rows_with(std::string_view relation,
                                                             std::size_t position,
                                                             const Value& value) const {
    static const std::vector<std::size_t> kEmpty;
    const auto& index = data(relation).index;
    if (position >= index.size()) return kEmpty;
    auto it = index[position].find(value);
    return it == index[position].end() ? kEmpty : it->second;
}

std::vector<Annotation> AnnotatedDatabase::annotations() const {
    std::vector<Annotation> out;
    out.reserve(size());
    for (const auto& [name, rel] : data_) {
        for (const auto& row : rel.rows) out.push_back(row.annotation);
    }
    return out;
}

}  // namespace qbe
