#pragma once

#include <stdexcept>
#include <string>

namespace shellspec {

/// Broad failure category; the CLI maps these to exit codes.
enum class ErrorCategory { Config, Numerical };

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    Error(std::string kind, ErrorCategory category, const std::string& what)
        : std::runtime_error(what), kind_(std::move(kind)), category_(category) {}

    [[nodiscard]] const std::string& kind() const noexcept { return kind_; }
    [[nodiscard]] ErrorCategory category() const noexcept { return category_; }

private:
    std::string kind_;
    ErrorCategory category_;
};

#define SHELLSPEC_DEFINE_ERROR(Name, Category)                                   \
    class Name : public Error {                                                  \
    public:                                                                      \
        explicit Name(const std::string& what) : Error(#Name, Category, what) {} \
    }

SHELLSPEC_DEFINE_ERROR(ConstraintViolation, ErrorCategory::Config);
SHELLSPEC_DEFINE_ERROR(UnclassifiableInteraction, ErrorCategory::Config);
SHELLSPEC_DEFINE_ERROR(InvalidArgument, ErrorCategory::Config);
SHELLSPEC_DEFINE_ERROR(GridMisaligned, ErrorCategory::Config);
SHELLSPEC_DEFINE_ERROR(BracketingFailure, ErrorCategory::Numerical);
SHELLSPEC_DEFINE_ERROR(DegenerateEdge, ErrorCategory::Numerical);
SHELLSPEC_DEFINE_ERROR(StepFailure, ErrorCategory::Numerical);
SHELLSPEC_DEFINE_ERROR(PositionMismatch, ErrorCategory::Numerical);
SHELLSPEC_DEFINE_ERROR(DegenerateEndpoint, ErrorCategory::Numerical);
SHELLSPEC_DEFINE_ERROR(NonDecayingStart, ErrorCategory::Numerical);
SHELLSPEC_DEFINE_ERROR(BasisZero, ErrorCategory::Numerical);
SHELLSPEC_DEFINE_ERROR(ConvergenceFailure, ErrorCategory::Numerical);

#undef SHELLSPEC_DEFINE_ERROR

}  // namespace shellspec
