#include "tdelay/error.hpp"

namespace tdelay {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::NonCommensurate: return "NonCommensurate";
    case ErrorCode::OrderViolation: return "OrderViolation";
    case ErrorCode::NonPositive: return "NonPositive";
    case ErrorCode::IndexOutOfRange: return "IndexOutOfRange";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::CustomArrayViolatesPins: return "CustomArrayViolatesPins";
    case ErrorCode::PinnedNodeWrite: return "PinnedNodeWrite";
    case ErrorCode::NonFiniteValue: return "NonFiniteValue";
    case ErrorCode::NonPositivePenalty: return "NonPositivePenalty";
    case ErrorCode::LineSearchFailure: return "LineSearchFailure";
    case ErrorCode::InnerSolveFailure: return "InnerSolveFailure";
    case ErrorCode::SingularKKT: return "SingularKKT";
    case ErrorCode::ProblemTooLarge: return "ProblemTooLarge";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::ValidationError: return "ValidationError";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

Error::Error(ErrorCode code, const std::string& message, std::string field, std::string rule)
    : std::runtime_error(std::string(to_string(code)) + ": " + message),
      code_(code),
      field_(std::move(field)),
      rule_(std::move(rule)) {}

}  // namespace tdelay
