#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace qbe {

enum class ErrorCode {
    SyntaxError,
    ArityError,
    SchemaMismatch,
    DuplicateAnnotation,
    DuplicateTuple,
    UnknownAnnotation,
    UnknownRelation,
    KindMismatch,
    UnsupportedProjection,
    ShapeViolation,
    NonDNFInput,
    Overflow,
    EmptyExplanations,
    DerivationExplosion,
    InstanceTooLarge,
    LimitExceeded,
    DegreeMismatch,
    EmptyCandidates,
    NotFound,
    IncompleteExplanations,
    NoConsistentQuery,
    InvalidArgument,
    RevisionConflict,
};

std::string_view to_string(ErrorCode code);

/// Engine-wide exception. Every failure carries a structured code so that the
/// CLI can map it to an exit status and the service to a response body.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(message), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

}  // namespace qbe
