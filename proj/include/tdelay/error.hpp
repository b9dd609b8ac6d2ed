#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace tdelay {

enum class ErrorCode {
  NonCommensurate,
  OrderViolation,
  NonPositive,
  IndexOutOfRange,
  DimensionMismatch,
  CustomArrayViolatesPins,
  PinnedNodeWrite,
  NonFiniteValue,
  NonPositivePenalty,
  LineSearchFailure,
  InnerSolveFailure,
  SingularKKT,
  ProblemTooLarge,
  InvalidArgument,
  ParseError,
  ValidationError,
  IoError,
};

std::string_view to_string(ErrorCode code);

/// Library-wide exception. `field` and `rule` are filled for validation
/// failures so callers can point at the offending input.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message, std::string field = {},
        std::string rule = {});

  ErrorCode code() const noexcept { return code_; }
  const std::string& field() const noexcept { return field_; }
  const std::string& rule() const noexcept { return rule_; }

 private:
  ErrorCode code_;
  std::string field_;
  std::string rule_;
};

inline Error validation_error(std::string field, std::string rule) {
  std::string msg = "ValidationError(" + field + ", " + rule + ")";
  return Error(ErrorCode::ValidationError, msg, std::move(field), std::move(rule));
}

}  // namespace tdelay
