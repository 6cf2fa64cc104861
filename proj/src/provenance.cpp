#include "qbe/provenance.hpp"

#include <algorithm>
#include <cctype>
#include <map>
#include <set>
#include <sstream>

namespace qbe {

std::string_view to_string(ErrorCode code) {
    switch (code) {
        case ErrorCode::SyntaxError: return "SyntaxError";
        case ErrorCode::ArityError: return "ArityError";
        case ErrorCode::SchemaMismatch: return "SchemaMismatch";
        case ErrorCode::DuplicateAnnotation: return "DuplicateAnnotation";
        case ErrorCode::DuplicateTuple: return "DuplicateTuple";
        case ErrorCode::UnknownAnnotation: return "UnknownAnnotation";
        case ErrorCode::UnknownRelation: return "UnknownRelation";
        case ErrorCode::KindMismatch: return "KindMismatch";
        case ErrorCode::UnsupportedProjection: return "UnsupportedProjection";
        case ErrorCode::ShapeViolation: return "ShapeViolation";
        case ErrorCode::NonDNFInput: return "NonDNFInput";
        case ErrorCode::Overflow: return "Overflow";
        case ErrorCode::EmptyExplanations: return "EmptyExplanations";
        case ErrorCode::DerivationExplosion: return "DerivationExplosion";
        case ErrorCode::InstanceTooLarge: return "InstanceTooLarge";
        case ErrorCode::LimitExceeded: return "LimitExceeded";
        case ErrorCode::DegreeMismatch: return "DegreeMismatch";
        case ErrorCode::EmptyCandidates: return "EmptyCandidates";
        case ErrorCode::NotFound: return "NotFound";
        case ErrorCode::IncompleteExplanations: return "IncompleteExplanations";
        case ErrorCode::NoConsistentQuery: return "NoConsistentQuery";
        case ErrorCode::InvalidArgument: return "InvalidArgument";
        case ErrorCode::RevisionConflict: return "RevisionConflict";
    }
    return "Unknown";
}

std::string_view to_string(SemiringKind kind) {
    switch (kind) {
        case SemiringKind::NX: return "nx";
        case SemiringKind::WhyX: return "why";
        case SemiringKind::TrioX: return "trio";
        case SemiringKind::BX: return "bx";
        case SemiringKind::PosBool: return "posbool";
    }
    return "?";
}

SemiringKind parse_semiring(std::string_view name) {
    // Case-insensitive; also accepts the bracketed spellings N[X], Why(X) and so on.
    std::string key;
    for (char c : name) {
        if (c == '[' || c == ']' || c == '(' || c == ')') continue;
        key += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    }
    if (key == "whyx") key = "why";
    if (key == "triox") key = "trio";
    for (auto kind : {SemiringKind::NX, SemiringKind::WhyX, SemiringKind::TrioX, SemiringKind::BX,
                      SemiringKind::PosBool}) {
        if (to_string(kind) == key) return kind;
    }
    throw Error(ErrorCode::InvalidArgument, "unknown semiring '" + std::string(name) + "'");
}

bool keeps_coefficients(SemiringKind kind) {
    return kind == SemiringKind::NX || kind == SemiringKind::TrioX;
}

bool keeps_exponents(SemiringKind kind) {
    return kind == SemiringKind::NX || kind == SemiringKind::BX;
}

bool projectable(SemiringKind from, SemiringKind to) {
    if (from == to || from == SemiringKind::NX) return true;
    switch (from) {
        case SemiringKind::TrioX:
        case SemiringKind::BX:
            return to == SemiringKind::WhyX || to == SemiringKind::PosBool;
        case SemiringKind::WhyX:
            return to == SemiringKind::PosBool;
        default:
            return false;
    }
}

namespace {

std::uint64_t checked_add(std::uint64_t a, std::uint64_t b, std::uint64_t cap) {
    if (a > cap || b > cap - a) {
        throw Error(ErrorCode::Overflow, "count exceeds cap " + std::to_string(cap));
    }
    return a + b;
}

std::vector<Factor> normalize_factors(const std::vector<Factor>& factors, bool keep_exponents,
                                      std::uint64_t cap) {
    std::map<Annotation, std::uint64_t> merged;
    for (const auto& f : factors) {
        if (f.exponent == 0) continue;
        auto& e = merged[f.token];
        e = keep_exponents ? checked_add(e, f.exponent, cap) : 1;
    }
    std::vector<Factor> out;
    out.reserve(merged.size());
    for (auto& [token, exponent] : merged) out.push_back({token, exponent});
    return out;
}

}  // namespace

std::uint64_t Monomial::degree() const {
    std::uint64_t n = 0;
    for (const auto& f : factors) n += f.exponent;
    return n;
}

std::vector<Annotation> Monomial::occurrences() const {
    std::vector<Annotation> out;
    for (const auto& f : factors) {
        for (std::uint64_t i = 0; i < f.exponent; ++i) out.push_back(f.token);
    }
    return out;
}

std::vector<Annotation> Monomial::support() const {
    std::vector<Annotation> out;
    out.reserve(factors.size());
    for (const auto& f : factors) out.push_back(f.token);
    return out;
}

Monomial monomial_from_bag(std::vector<Annotation> bag, std::uint64_t cap) {
    std::vector<Factor> factors;
    factors.reserve(bag.size());
    for (auto& token : bag) factors.push_back({std::move(token), 1});
    return Monomial{normalize_factors(factors, true, cap), 1};
}

ProvenancePolynomial canonicalize(const ProvenancePolynomial& poly, std::uint64_t cap) {
    const bool keep_exp = keeps_exponents(poly.kind);
    const bool keep_coef = keeps_coefficients(poly.kind);
    std::map<std::vector<Factor>, std::uint64_t> merged;
    for (const auto& m : poly.monomials) {
        if (m.coefficient == 0) continue;
        if (m.coefficient > cap) throw Error(ErrorCode::Overflow, "coefficient exceeds cap");
        auto factors = normalize_factors(m.factors, keep_exp, cap);
        auto& c = merged[std::move(factors)];
        c = keep_coef ? checked_add(c, m.coefficient, cap) : 1;
    }
    ProvenancePolynomial out;
    out.kind = poly.kind;
    out.monomials.reserve(merged.size());
    for (auto& [factors, coefficient] : merged) out.monomials.push_back({factors, coefficient});
    return out;
}

void validate_shape(const ProvenancePolynomial& poly) {
    for (const auto& m : poly.monomials) {
        if (m.factors.empty()) {
            throw Error(ErrorCode::ShapeViolation, "monomial of degree 0");
        }
        if (!keeps_coefficients(poly.kind) && m.coefficient != 1) {
            throw Error(ErrorCode::ShapeViolation, "coefficient " + std::to_string(m.coefficient) +
                                                       " not allowed in " +
                                                       std::string(to_string(poly.kind)));
        }
        for (const auto& f : m.factors) {
            if (!keeps_exponents(poly.kind) && f.exponent != 1) {
                throw Error(ErrorCode::ShapeViolation,
                            "exponent on '" + f.token + "' not allowed in " +
                                std::string(to_string(poly.kind)));
            }
        }
    }
}

ProvenancePolynomial project(const ProvenancePolynomial& poly, SemiringKind target,
                             std::uint64_t cap) {
    if (!projectable(poly.kind, target)) {
        throw Error(ErrorCode::UnsupportedProjection,
                    "cannot project " + std::string(to_string(poly.kind)) + " onto " +
                        std::string(to_string(target)));
    }
    ProvenancePolynomial relabeled = poly;
    relabeled.kind = target;
    return canonicalize(relabeled, cap);
}

bool leq(const ProvenancePolynomial& lhs, const ProvenancePolynomial& rhs, SemiringKind kind) {
    if (lhs.kind != kind || rhs.kind != kind) {
        throw Error(ErrorCode::KindMismatch, "natural order requires both operands in " +
                                                 std::string(to_string(kind)));
    }
    const bool coefficients = keeps_coefficients(kind);
    for (const auto& m : lhs.monomials) {
        auto it = std::lower_bound(
            rhs.monomials.begin(), rhs.monomials.end(), m,
            [](const Monomial& a, const Monomial& b) { return a.factors < b.factors; });
        if (it == rhs.monomials.end() || it->factors != m.factors) return false;
        if (coefficients && m.coefficient > it->coefficient) return false;
    }
    return true;
}

SemiringKind detect_semiring(const std::vector<std::vector<Explanation>>& explanations) {
    bool repeated_token = false;
    bool repeated_explanation = false;
    for (std::size_t i = 0; i < explanations.size(); ++i) {
        const auto& group = explanations[i];
        if (group.empty()) {
            throw Error(ErrorCode::EmptyExplanations,
                        "example " + std::to_string(i) + " has no explanation");
        }
        std::set<std::vector<Annotation>> seen;
        for (auto bag : group) {
            std::sort(bag.begin(), bag.end());
            if (std::adjacent_find(bag.begin(), bag.end()) != bag.end()) repeated_token = true;
            if (!seen.insert(bag).second) repeated_explanation = true;
        }
    }
    if (repeated_token && repeated_explanation) return SemiringKind::NX;
    if (repeated_token) return SemiringKind::BX;
    if (repeated_explanation) return SemiringKind::TrioX;
    return SemiringKind::WhyX;
}

bool is_valid_token(std::string_view token) {
    if (token.empty()) return false;
    if (!(std::isalpha(static_cast<unsigned char>(token[0])) || token[0] == '_')) return false;
    return std::all_of(token.begin(), token.end(), [](char c) {
        return std::isalnum(static_cast<unsigned char>(c)) || c == '_';
    });
}

std::string format_monomial(const Monomial& m) {
    std::ostringstream out;
    if (m.coefficient != 1) out << m.coefficient << '*';
    for (std::size_t i = 0; i < m.factors.size(); ++i) {
        if (i) out << '.';
        out << m.factors[i].token;
        if (m.factors[i].exponent != 1) out << '^' << m.factors[i].exponent;
    }
    return out.str();
}

std::string format_polynomial(const ProvenancePolynomial& poly) {
    if (poly.monomials.empty()) return "0";
    std::string out;
    for (std::size_t i = 0; i < poly.monomials.size(); ++i) {
        if (i) out += " + ";
        out += format_monomial(poly.monomials[i]);
    }
    return out;
}

namespace {

class PolyLexer {
public:
    explicit PolyLexer(std::string_view text) : text_(text) {}

    void skip_ws() {
        while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    }
    bool at_end() {
        skip_ws();
        return pos_ >= text_.size();
    }
    bool accept(char c) {
        skip_ws();
        if (pos_ < text_.size() && text_[pos_] == c) {
            ++pos_;
            return true;
        }
        return false;
    }
    bool peek_digit() {
        skip_ws();
        return pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]));
    }
    std::uint64_t number(std::uint64_t cap) {
        skip_ws();
        std::size_t start = pos_;
        std::uint64_t value = 0;
        while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) {
            value = value * 10 + static_cast<std::uint64_t>(text_[pos_] - '0');
            if (value > cap) throw Error(ErrorCode::Overflow, "count exceeds cap");
            ++pos_;
        }
        if (start == pos_) fail("expected number");
        return value;
    }
    std::string token() {
        skip_ws();
        std::size_t start = pos_;
        while (pos_ < text_.size() &&
               (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_')) {
            ++pos_;
        }
        std::string tok(text_.substr(start, pos_ - start));
        if (!is_valid_token(tok)) {
            pos_ = start;
            fail("expected annotation token");
        }
        return tok;
    }
    [[noreturn]] void fail(const std::string& what) const {
        throw Error(ErrorCode::SyntaxError, what + " at position " + std::to_string(pos_));
    }
    std::size_t pos() const { return pos_; }

private:
    std::string_view text_;
    std::size_t pos_ = 0;
};

Monomial parse_monomial_at(PolyLexer& lex, std::uint64_t cap) {
    Monomial m;
    if (lex.peek_digit()) {
        m.coefficient = lex.number(cap);
        if (!lex.accept('*')) lex.fail("expected '*' after coefficient");
        if (m.coefficient == 0) lex.fail("coefficient must be positive");
    }
    do {
        Factor f{lex.token(), 1};
        if (lex.accept('^')) {
            f.exponent = lex.number(cap);
            if (f.exponent == 0) lex.fail("exponent must be positive");
        }
        m.factors.push_back(std::move(f));
    } while (lex.accept('.'));
    m.factors = normalize_factors(m.factors, true, cap);
    return m;
}

}  // namespace

Monomial parse_monomial(std::string_view text, std::uint64_t cap) {
    PolyLexer lex(text);
    Monomial m = parse_monomial_at(lex, cap);
    if (!lex.at_end()) lex.fail("trailing input");
    return m;
}

ProvenancePolynomial parse_polynomial(std::string_view text, SemiringKind kind,
                                      std::uint64_t cap) {
    if (kind == SemiringKind::PosBool && text.find_first_of("()") != std::string_view::npos) {
        throw Error(ErrorCode::NonDNFInput, "PosBool input must be a sum of products");
    }
    ProvenancePolynomial poly;
    poly.kind = kind;
    PolyLexer lex(text);
    if (lex.at_end()) lex.fail("empty polynomial");
    if (lex.accept('0')) {
        if (!lex.at_end()) lex.fail("trailing input after zero");
        return poly;
    }
    do {
        poly.monomials.push_back(parse_monomial_at(lex, cap));
    } while (lex.accept('+'));
    if (!lex.at_end()) lex.fail("trailing input");
    validate_shape(poly);
    return canonicalize(poly, cap);
}

}  // namespace qbe
