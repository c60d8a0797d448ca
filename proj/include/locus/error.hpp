#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>

namespace locus {

enum class ErrorKind {
    TooFewPoints,
    DimensionMismatch,
    NonFiniteValue,
    DuplicatePoint,
    SingularSystem,
    NoConvergence,
    EmptyTrainingSet,
    DegenerateNeighborhood,
    InsufficientPoints,
    ZeroWidthSegment,
    EmptyInput,
    ParseError,
    InvalidArgument,
};

constexpr std::string_view to_string(ErrorKind kind) {
    switch (kind) {
    case ErrorKind::TooFewPoints: return "TooFewPoints";
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::NonFiniteValue: return "NonFiniteValue";
    case ErrorKind::DuplicatePoint: return "DuplicatePoint";
    case ErrorKind::SingularSystem: return "SingularSystem";
    case ErrorKind::NoConvergence: return "NoConvergence";
    case ErrorKind::EmptyTrainingSet: return "EmptyTrainingSet";
    case ErrorKind::DegenerateNeighborhood: return "DegenerateNeighborhood";
    case ErrorKind::InsufficientPoints: return "InsufficientPoints";
    case ErrorKind::ZeroWidthSegment: return "ZeroWidthSegment";
    case ErrorKind::EmptyInput: return "EmptyInput";
    case ErrorKind::ParseError: return "ParseError";
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    }
    return "Unknown";
}

/// Every failure raised by the library carries a kind so callers can branch
/// without parsing messages.
class Error : public std::runtime_error {
  public:
    Error(ErrorKind kind, const std::string &what)
        : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

    /// Validation-class errors describe bad input rather than a numeric failure.
    bool is_validation() const noexcept {
        switch (kind_) {
        case ErrorKind::TooFewPoints:
        case ErrorKind::DimensionMismatch:
        case ErrorKind::NonFiniteValue:
        case ErrorKind::DuplicatePoint:
        case ErrorKind::EmptyTrainingSet:
        case ErrorKind::ParseError:
        case ErrorKind::InvalidArgument:
            return true;
        default:
            return false;
        }
    }

  private:
    ErrorKind kind_;
};

class ParseError : public Error {
  public:
    ParseError(std::size_t line, const std::string &what)
        : Error(ErrorKind::ParseError, "line " + std::to_string(line) + ": " + what), line_(line) {}

    std::size_t line() const noexcept { return line_; }

  private:
    std::size_t line_;
};

} // namespace locus
