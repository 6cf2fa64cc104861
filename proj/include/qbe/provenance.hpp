#pragma once

#include <compare>
#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "qbe/error.hpp"

namespace qbe {

/// Annotation tokens identify input tuples of an abstractly tagged database.
using Annotation = std::string;

/// Default upper bound for coefficients and exponents.
inline constexpr std::uint64_t kDefaultCountCap = std::uint64_t{1} << 32;

enum class SemiringKind { NX, WhyX, TrioX, BX, PosBool };

std::string_view to_string(SemiringKind kind);
SemiringKind parse_semiring(std::string_view name);

/// True if coefficients are meaningful in `kind` (N[X] and Trio(X)).
bool keeps_coefficients(SemiringKind kind);
/// True if exponents are meaningful in `kind` (N[X] and B[X]).
bool keeps_exponents(SemiringKind kind);

/// True if every polynomial of `from` can be projected onto `to`.
bool projectable(SemiringKind from, SemiringKind to);

struct Factor {
    Annotation token;
    std::uint64_t exponent = 1;

    auto operator<=>(const Factor&) const = default;
};

/// A product of annotations with a natural coefficient.
struct Monomial {
    std::vector<Factor> factors;  // sorted by token, exponents >= 1
    std::uint64_t coefficient = 1;

    /// Total degree: the sum of exponents.
    std::uint64_t degree() const;
    /// Expands factors into a flat sorted token list, one entry per exponent unit.
    std::vector<Annotation> occurrences() const;
    /// Distinct tokens.
    std::vector<Annotation> support() const;

    bool same_factors(const Monomial& other) const { return factors == other.factors; }

    friend bool operator==(const Monomial&, const Monomial&) = default;
};

/// Builds a canonical coefficient-1 monomial from a bag of tokens.
Monomial monomial_from_bag(std::vector<Annotation> bag, std::uint64_t cap = kDefaultCountCap);

struct ProvenancePolynomial {
    std::vector<Monomial> monomials;
    SemiringKind kind = SemiringKind::NX;

    bool empty() const { return monomials.empty(); }

    friend bool operator==(const ProvenancePolynomial&, const ProvenancePolynomial&) = default;
};

/// Normal form: factors sorted, equal factors merged into exponents, equal
/// monomials merged into coefficients, monomials sorted by factor list.
/// Throws Overflow when a count passes `cap`.
ProvenancePolynomial canonicalize(const ProvenancePolynomial& poly,
                                  std::uint64_t cap = kDefaultCountCap);

/// Checks the shape constraints of `poly.kind` (throws ShapeViolation).
void validate_shape(const ProvenancePolynomial& poly);

/// Maps a canonical polynomial into a less informative semiring.
ProvenancePolynomial project(const ProvenancePolynomial& poly, SemiringKind target,
                             std::uint64_t cap = kDefaultCountCap);

/// Natural order of the semiring `kind`.
bool leq(const ProvenancePolynomial& lhs, const ProvenancePolynomial& rhs, SemiringKind kind);

/// One explanation: the bag of tokens a user picked for a single derivation.
using Explanation = std::vector<Annotation>;

/// Picks the least informative semiring able to express the explanations.
/// Outer list: one entry per example tuple.
SemiringKind detect_semiring(const std::vector<std::vector<Explanation>>& explanations);

/// Textual syntax: `2*a^2.c.b + f.e.c.a`; the zero polynomial prints as `0`.
std::string format_monomial(const Monomial& m);
std::string format_polynomial(const ProvenancePolynomial& poly);
Monomial parse_monomial(std::string_view text, std::uint64_t cap = kDefaultCountCap);
/// Parses and canonicalizes. For PosBool, parentheses are rejected with NonDNFInput.
ProvenancePolynomial parse_polynomial(std::string_view text, SemiringKind kind = SemiringKind::NX,
                                      std::uint64_t cap = kDefaultCountCap);

/// Token grammar shared by the polynomial syntax and database files.
bool is_valid_token(std::string_view token);

}  // namespace qbe
