#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace dsparse {

/// Failure categories shared by every module.
enum class ErrorCode {
  InvalidArgument,
  DimensionMismatch,
  BudgetInvalid,
  CapExceeded,
  WeightOrder,
  GammaRange,
  EpsRange,
  NoConvergence,
  SigmaUnknown,
  ConditionViolated,
  ConfigInvalid,
  MissingArtifact,
  ParseError,
};

std::string_view to_string(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message);

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] void fail(ErrorCode code, const std::string& message);

}  // namespace dsparse
