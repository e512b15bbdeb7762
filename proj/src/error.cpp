#include "dsparse/error.hpp"

namespace dsparse {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::BudgetInvalid: return "BudgetInvalid";
    case ErrorCode::CapExceeded: return "CapExceeded";
    case ErrorCode::WeightOrder: return "WeightOrder";
    case ErrorCode::GammaRange: return "GammaRange";
    case ErrorCode::EpsRange: return "EpsRange";
    case ErrorCode::NoConvergence: return "NoConvergence";
    case ErrorCode::SigmaUnknown: return "SigmaUnknown";
    case ErrorCode::ConditionViolated: return "ConditionViolated";
    case ErrorCode::ConfigInvalid: return "ConfigInvalid";
    case ErrorCode::MissingArtifact: return "MissingArtifact";
    case ErrorCode::ParseError: return "ParseError";
  }
  return "Unknown";
}

Error::Error(ErrorCode code, const std::string& message)
    : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

void fail(ErrorCode code, const std::string& message) { throw Error(code, message); }

}  // namespace dsparse
