#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "qbe/relational.hpp"

namespace qbe {

/// Schema manifest: one relation per line, `route(A, B)` optionally followed by
/// the flag `annotated` (first CSV column then holds the annotation token).
/// Blank lines and lines starting with '#' are ignored.
struct RelationManifest {
    std::string name;
    std::vector<std::string> attributes;
    bool annotated = false;
};
std::vector<RelationManifest> parse_schema_manifest(std::string_view text);

/// Splits one CSV record; double quotes protect commas, `""` escapes a quote.
std::vector<std::string> split_csv_line(std::string_view line);

/// Builds a database from a manifest and one CSV text per relation (header row
/// first). Rows without an annotation column get `<relation><row>` tokens,
/// counting from 1. Throws SchemaMismatch, DuplicateAnnotation.
AnnotatedDatabase load_database(std::string_view manifest,
                                const std::map<std::string, std::string>& csv_by_relation);

/// Reads DIR/schema.txt and DIR/<relation>.csv.
AnnotatedDatabase load_database_dir(const std::filesystem::path& dir);

std::string read_file(const std::filesystem::path& path);

/// One example block: a tuple line followed by monomial lines.
struct ExampleBlock {
    Tuple tuple;
    std::vector<Monomial> monomials;  // as written, coefficients included
};

/// Blocks are separated by blank lines; '#' starts a comment line.
std::vector<ExampleBlock> parse_examples(std::string_view text);

/// Explanations implied by written monomials: a coefficient c gives c copies.
std::vector<std::vector<Explanation>> explanations_of(const std::vector<ExampleBlock>& blocks);

/// Assembles a KExample; the semiring is detected unless `forced`.
/// Throws UnknownAnnotation, SchemaMismatch, EmptyExplanations.
KExample make_example(std::shared_ptr<const AnnotatedDatabase> db,
                      const std::vector<ExampleBlock>& blocks,
                      std::optional<SemiringKind> forced = std::nullopt);

}  // namespace qbe
