#include "qbe/io.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <set>
#include <sstream>

namespace qbe {

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
}

std::vector<std::string_view> lines_of(std::string_view text) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (start <= text.size()) {
        std::size_t end = text.find('\n', start);
        if (end == std::string_view::npos) end = text.size();
        std::string_view line = text.substr(start, end - start);
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        out.push_back(line);
        start = end + 1;
    }
    return out;
}

[[noreturn]] void syntax(std::size_t line, const std::string& what) {
    throw Error(ErrorCode::SyntaxError, "line " + std::to_string(line) + ": " + what);
}

}  // namespace

std::vector<RelationManifest> parse_schema_manifest(std::string_view text) {
    std::vector<RelationManifest> out;
    const auto lines = lines_of(text);
    for (std::size_t i = 0; i < lines.size(); ++i) {
        std::string_view line = trim(lines[i]);
        if (line.empty() || line.front() == '#') continue;
        auto open = line.find('(');
        auto close = line.find(')');
        if (open == std::string_view::npos || close == std::string_view::npos || close < open) {
            syntax(i + 1, "expected name(attr, ...)");
        }
        RelationManifest rel;
        rel.name = std::string(trim(line.substr(0, open)));
        if (!is_valid_token(rel.name)) syntax(i + 1, "bad relation name '" + rel.name + "'");
        std::string_view attrs = line.substr(open + 1, close - open - 1);
        std::size_t start = 0;
        while (true) {
            auto comma = attrs.find(',', start);
            auto attr = trim(attrs.substr(start, comma == std::string_view::npos ? comma : comma - start));
            if (!is_valid_token(attr)) syntax(i + 1, "bad attribute name '" + std::string(attr) + "'");
            rel.attributes.emplace_back(attr);
            if (comma == std::string_view::npos) break;
            start = comma + 1;
        }
        auto flag = trim(line.substr(close + 1));
        if (flag == "annotated") {
            rel.annotated = true;
        } else if (!flag.empty()) {
            syntax(i + 1, "unknown flag '" + std::string(flag) + "'");
        }
        out.push_back(std::move(rel));
    }
    return out;
}

std::vector<std::string> split_csv_line(std::string_view line) {
    std::vector<std::string> out;
    std::string field;
    bool quoted = false, was_quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    field += '"';
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                field += c;
            }
        } else if (c == '"') {
            quoted = was_quoted = true;
        } else if (c == ',') {
            out.push_back(was_quoted ? field : std::string(trim(field)));
            field.clear();
            was_quoted = false;
        } else {
            field += c;
        }
    }
    if (quoted) throw Error(ErrorCode::SyntaxError, "unterminated quote in CSV line");
    out.push_back(was_quoted ? field : std::string(trim(field)));
    return out;
}

AnnotatedDatabase load_database(std::string_view manifest,
                                const std::map<std::string, std::string>& csv_by_relation) {
    const auto relations = parse_schema_manifest(manifest);
    Schema schema;
    for (const auto& rel : relations) schema.add(rel.name, rel.attributes);
    AnnotatedDatabase db(schema);
    for (const auto& rel : relations) {
        auto it = csv_by_relation.find(rel.name);
        if (it == csv_by_relation.end()) {
            throw Error(ErrorCode::SchemaMismatch, "no data for relation '" + rel.name + "'");
        }
        const std::size_t offset = rel.annotated ? 1 : 0;
        const std::size_t width = rel.attributes.size() + offset;
        bool header = true;
        std::size_t row = 0;
        const auto lines = lines_of(it->second);
        for (std::size_t i = 0; i < lines.size(); ++i) {
            if (trim(lines[i]).empty()) continue;
            auto fields = split_csv_line(lines[i]);
            const std::string where = rel.name + ".csv line " + std::to_string(i + 1);
            if (fields.size() != width) {
                throw Error(ErrorCode::SchemaMismatch, where + ": expected " + std::to_string(width) +
                                                           " fields, found " +
                                                           std::to_string(fields.size()));
            }
            if (header) {
                header = false;
                if (!std::equal(rel.attributes.begin(), rel.attributes.end(), fields.begin() + offset)) {
                    throw Error(ErrorCode::SchemaMismatch, where + ": header does not match schema");
                }
                continue;
            }
            ++row;
            Annotation token = rel.annotated ? fields[0] : rel.name + std::to_string(row);
            if (!is_valid_token(token)) {
                throw Error(ErrorCode::SyntaxError, where + ": bad annotation '" + token + "'");
            }
            db.insert(rel.name, Tuple(fields.begin() + offset, fields.end()), std::move(token));
        }
        if (header) throw Error(ErrorCode::SchemaMismatch, rel.name + ".csv has no header row");
    }
    return db;
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::NotFound, "cannot read " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

AnnotatedDatabase load_database_dir(const std::filesystem::path& dir) {
    const std::string manifest = read_file(dir / "schema.txt");
    std::map<std::string, std::string> csv;
    for (const auto& rel : parse_schema_manifest(manifest)) {
        csv.emplace(rel.name, read_file(dir / (rel.name + ".csv")));
    }
    return load_database(manifest, csv);
}

std::vector<ExampleBlock> parse_examples(std::string_view text) {
    std::vector<ExampleBlock> out;
    bool in_block = false;
    const auto lines = lines_of(text);
    for (std::size_t i = 0; i < lines.size(); ++i) {
        std::string_view line = trim(lines[i]);
        if (!line.empty() && line.front() == '#') continue;
        if (line.empty()) {
            in_block = false;
            continue;
        }
        if (!in_block) {
            ExampleBlock block;
            block.tuple = split_csv_line(line);
            out.push_back(std::move(block));
            in_block = true;
            continue;
        }
        try {
            out.back().monomials.push_back(parse_monomial(line));
        } catch (const Error& e) {
            throw Error(e.code(), "line " + std::to_string(i + 1) + ": " + e.what());
        }
    }
    return out;
}

std::vector<std::vector<Explanation>> explanations_of(const std::vector<ExampleBlock>& blocks) {
    std::vector<std::vector<Explanation>> out;
    for (const auto& b : blocks) {
        std::vector<Explanation> ex;
        for (const auto& m : b.monomials) {
            for (std::uint64_t c = 0; c < m.coefficient; ++c) ex.push_back(m.occurrences());
        }
        out.push_back(std::move(ex));
    }
    return out;
}

KExample make_example(std::shared_ptr<const AnnotatedDatabase> db,
                      const std::vector<ExampleBlock>& blocks, std::optional<SemiringKind> forced) {
    if (blocks.empty()) throw Error(ErrorCode::EmptyExplanations, "no examples given");
    for (std::size_t i = 0; i < blocks.size(); ++i) {
        if (blocks[i].monomials.empty()) {
            throw Error(ErrorCode::EmptyExplanations,
                        "example " + std::to_string(i + 1) + " has no explanation");
        }
    }
    KExample ex;
    ex.input = std::move(db);
    ex.kind = forced ? *forced : detect_semiring(explanations_of(blocks));
    std::map<Tuple, ProvenancePolynomial> merged;
    std::vector<Tuple> order;
    for (const auto& b : blocks) {
        auto [it, inserted] = merged.try_emplace(b.tuple);
        if (inserted) order.push_back(b.tuple);
        for (const auto& m : b.monomials) it->second.monomials.push_back(m);
    }
    for (const auto& t : order) {
        ProvenancePolynomial poly = canonicalize(merged.at(t));
        if (ex.kind != SemiringKind::NX) poly = project(poly, ex.kind);
        ex.output.push_back({t, std::move(poly)});
    }
    ex.validate();
    return ex;
}

}  // namespace qbe
