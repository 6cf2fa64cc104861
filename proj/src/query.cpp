#include <algorithm>
#include <cctype>
#include <cstdio>
#include <functional>

#include "qbe/relational.hpp"

namespace qbe {

std::vector<std::string> ConjunctiveQuery::variables() const {
    std::vector<std::string> out;
    std::set<std::string> seen;
    auto visit = [&](const Atom& atom) {
        for (const auto& t : atom.terms) {
            if (t.is_variable() && seen.insert(t.text).second) out.push_back(t.text);
        }
    };
    visit(head);
    for (const auto& atom : body) visit(atom);
    return out;
}

std::set<std::string> ConjunctiveQuery::head_variables() const {
    std::set<std::string> out;
    for (const auto& t : head.terms) {
        if (t.is_variable()) out.insert(t.text);
    }
    return out;
}

std::size_t unique_variable_count(const ConjunctiveQuery& query) {
    return query.variables().size();
}

void validate_query(const ConjunctiveQuery& query, const Schema* schema) {
    if (query.body.empty()) throw Error(ErrorCode::SyntaxError, "query body is empty");
    if (query.head.terms.empty()) throw Error(ErrorCode::SyntaxError, "query head has no terms");
    std::set<std::string> body_vars;
    for (const auto& atom : query.body) {
        for (const auto& t : atom.terms) {
            if (t.is_variable()) body_vars.insert(t.text);
        }
        if (schema) {
            if (!schema->contains(atom.relation)) {
                throw Error(ErrorCode::UnknownRelation, "unknown relation '" + atom.relation + "'");
            }
            if (schema->arity(atom.relation) != atom.terms.size()) {
                throw Error(ErrorCode::ArityError,
                            "atom " + atom.relation + " has " + std::to_string(atom.terms.size()) +
                                " terms, relation arity is " +
                                std::to_string(schema->arity(atom.relation)));
            }
        }
    }
    for (const auto& v : query.head_variables()) {
        if (!body_vars.count(v)) {
            throw Error(ErrorCode::SyntaxError, "head variable '" + v + "' missing from body");
        }
    }
}

namespace {

class QueryParser {
public:
    explicit QueryParser(std::string_view text) : text_(text) {}

    ConjunctiveQuery parse() {
        ConjunctiveQuery q;
        q.head = atom();
        expect(":-");
        skip_ws();
        if (peek() == '.') fail("empty body");
        q.body.push_back(atom());
        while (accept(',')) q.body.push_back(atom());
        if (!accept('.')) fail("expected ',' or '.'");
        skip_ws();
        if (pos_ != text_.size()) fail("trailing input");
        return q;
    }

private:
    Atom atom() {
        Atom a;
        a.relation = identifier("relation name");
        if (!accept('(')) fail("expected '('");
        a.terms.push_back(term());
        while (accept(',')) a.terms.push_back(term());
        if (!accept(')')) fail("expected ',' or ')'");
        return a;
    }

    Term term() {
        skip_ws();
        if (peek() == '\'') {
            ++pos_;
            std::string value;
            while (true) {
                if (pos_ >= text_.size()) fail("unterminated constant");
                char c = text_[pos_++];
                if (c == '\'') {
                    if (peek() == '\'') {
                        value += '\'';
                        ++pos_;
                        continue;
                    }
                    break;
                }
                value += c;
            }
            return Term::constant(std::move(value));
        }
        return Term::variable(identifier("term"));
    }

    std::string identifier(const char* what) {
        skip_ws();
        std::size_t start = pos_;
        if (pos_ < text_.size() &&
            (std::isalpha(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_')) {
            ++pos_;
            while (pos_ < text_.size() &&
                   (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_')) {
                ++pos_;
            }
        }
        if (start == pos_) fail(std::string("expected ") + what);
        return std::string(text_.substr(start, pos_ - start));
    }

    void skip_ws() {
        while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    }
    char peek() const { return pos_ < text_.size() ? text_[pos_] : '\0'; }
    bool accept(char c) {
        skip_ws();
        if (peek() == c) {
            ++pos_;
            return true;
        }
        return false;
    }
    void expect(std::string_view s) {
        skip_ws();
        if (text_.substr(pos_, s.size()) != s) fail("expected '" + std::string(s) + "'");
        pos_ += s.size();
    }
    [[noreturn]] void fail(const std::string& what) const {
        throw Error(ErrorCode::SyntaxError, what + " at position " + std::to_string(pos_));
    }

    std::string_view text_;
    std::size_t pos_ = 0;
};

std::string quote(const std::string& value) {
    std::string out = "'";
    for (char c : value) {
        out += c;
        if (c == '\'') out += '\'';
    }
    return out + "'";
}

void append_atom(std::string& out, const Atom& atom, const std::map<std::string, std::string>& names) {
    out += atom.relation;
    out += '(';
    for (std::size_t i = 0; i < atom.terms.size(); ++i) {
        if (i) out += ", ";
        const auto& t = atom.terms[i];
        out += t.is_variable() ? names.at(t.text) : quote(t.text);
    }
    out += ')';
}

}  // namespace

ConjunctiveQuery parse_query(std::string_view text, const Schema* schema) {
    ConjunctiveQuery q = QueryParser(text).parse();
    validate_query(q, schema);
    return q;
}

std::string format_query(const ConjunctiveQuery& query) {
    std::map<std::string, std::string> names;
    for (const auto& v : query.variables()) names.emplace(v, "v" + std::to_string(names.size() + 1));
    std::string out;
    append_atom(out, query.head, names);
    out += " :- ";
    for (std::size_t i = 0; i < query.body.size(); ++i) {
        if (i) out += ", ";
        append_atom(out, query.body[i], names);
    }
    out += '.';
    return out;
}

namespace {

// Greedy body ordering. At every step the remaining atom with the smallest
// key is placed next; ties are explored and the smallest rendering wins.
class CanonicalOrderer {
public:
    explicit CanonicalOrderer(const ConjunctiveQuery& q) : query_(q) {}

    ConjunctiveQuery run() {
        std::map<std::string, int> names;
        for (const auto& t : query_.head.terms) {
            if (t.is_variable() && !names.count(t.text)) {
                int id = static_cast<int>(names.size());
                names.emplace(t.text, id);
            }
        }
        std::vector<bool> used(query_.body.size(), false);
        std::vector<std::size_t> order;
        search(names, used, order, &query_.head);
        ConjunctiveQuery out;
        out.head = query_.head;
        for (std::size_t i : best_order_) out.body.push_back(query_.body[i]);
        return out;
    }

private:
    using Key = std::vector<std::pair<int, std::string>>;

    static bool shares_term(const Atom& a, const Atom& b) {
        for (const auto& x : a.terms) {
            for (const auto& y : b.terms) {
                if (x == y) return true;
            }
        }
        return false;
    }

    Key key(const Atom& atom, const std::map<std::string, int>& names, const Atom* last) const {
        Key k;
        k.emplace_back(last && shares_term(atom, *last) ? 0 : 1, "");
        k.emplace_back(0, atom.relation);
        std::map<std::string, int> local;
        for (const auto& t : atom.terms) {
            if (!t.is_variable()) {
                k.emplace_back(1, t.text);
            } else if (auto it = names.find(t.text); it != names.end()) {
                char buf[16];
                std::snprintf(buf, sizeof buf, "%08d", it->second);
                k.emplace_back(0, buf);
            } else {
                auto [lit, inserted] = local.emplace(t.text, static_cast<int>(local.size()));
                k.emplace_back(2, std::to_string(lit->second));
            }
        }
        return k;
    }

    void search(std::map<std::string, int>& names, std::vector<bool>& used,
                std::vector<std::size_t>& order, const Atom* last) {
        if (order.size() == query_.body.size()) {
            ConjunctiveQuery candidate;
            candidate.head = query_.head;
            for (std::size_t i : order) candidate.body.push_back(query_.body[i]);
            std::string text = format_query(candidate);
            if (best_text_.empty() || text < best_text_) {
                best_text_ = std::move(text);
                best_order_ = order;
            }
            ++leaves_;
            return;
        }
        std::optional<Key> best;
        std::vector<std::size_t> tied;
        for (std::size_t i = 0; i < query_.body.size(); ++i) {
            if (used[i]) continue;
            Key k = key(query_.body[i], names, last);
            if (!best || k < *best) {
                best = std::move(k);
                tied.assign(1, i);
            } else if (k == *best) {
                tied.push_back(i);
            }
        }
        for (std::size_t i : tied) {
            if (leaves_ >= kMaxLeaves && !best_text_.empty()) return;
            auto saved = names;
            for (const auto& t : query_.body[i].terms) {
                if (t.is_variable() && !names.count(t.text)) {
                    int id = static_cast<int>(names.size());
                    names.emplace(t.text, id);
                }
            }
            used[i] = true;
            order.push_back(i);
            search(names, used, order, &query_.body[i]);
            order.pop_back();
            used[i] = false;
            names = std::move(saved);
        }
    }

    static constexpr std::size_t kMaxLeaves = 4096;
    const ConjunctiveQuery& query_;
    std::string best_text_;
    std::vector<std::size_t> best_order_;
    std::size_t leaves_ = 0;
};

}  // namespace

ConjunctiveQuery canonical_form(const ConjunctiveQuery& query) {
    ConjunctiveQuery ordered = CanonicalOrderer(query).run();
    std::map<std::string, std::string> names;
    for (const auto& v : ordered.variables()) {
        names.emplace(v, "v" + std::to_string(names.size() + 1));
    }
    auto rename = [&](Atom& atom) {
        for (auto& t : atom.terms) {
            if (t.is_variable()) t.text = names.at(t.text);
        }
    };
    rename(ordered.head);
    for (auto& atom : ordered.body) rename(atom);
    return ordered;
}

std::string canonical_text(const ConjunctiveQuery& query) {
    return format_query(canonical_form(query));
}

}  // namespace qbe
