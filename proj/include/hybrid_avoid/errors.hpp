#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace hybrid_avoid {

enum class ErrorCode {
  ZeroDirection,
  DimensionMismatch,
  NonFinite,
  NotUnit,
  MalformedRegion,
  InfeasibleEpsH,
  InfeasibleMu,
  InfeasibleTheta,
  InternalInfeasibility,
  DegenerateHint,
  ZeroCenter,
  ValidationFailure,
  AtObstacleCenter,
  EmptyJumpTarget,
  UnsafeStart,
  NumericalStall,
  MismatchedParams,
  PreconditionViolated,
  BadConfig,
};

constexpr std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::ZeroDirection: return "ZeroDirection";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::NonFinite: return "NonFinite";
    case ErrorCode::NotUnit: return "NotUnit";
    case ErrorCode::MalformedRegion: return "MalformedRegion";
    case ErrorCode::InfeasibleEpsH: return "InfeasibleEpsH";
    case ErrorCode::InfeasibleMu: return "InfeasibleMu";
    case ErrorCode::InfeasibleTheta: return "InfeasibleTheta";
    case ErrorCode::InternalInfeasibility: return "InternalInfeasibility";
    case ErrorCode::DegenerateHint: return "DegenerateHint";
    case ErrorCode::ZeroCenter: return "ZeroCenter";
    case ErrorCode::ValidationFailure: return "ValidationFailure";
    case ErrorCode::AtObstacleCenter: return "AtObstacleCenter";
    case ErrorCode::EmptyJumpTarget: return "EmptyJumpTarget";
    case ErrorCode::UnsafeStart: return "UnsafeStart";
    case ErrorCode::NumericalStall: return "NumericalStall";
    case ErrorCode::MismatchedParams: return "MismatchedParams";
    case ErrorCode::PreconditionViolated: return "PreconditionViolated";
    case ErrorCode::BadConfig: return "BadConfig";
  }
  return "Unknown";
}

// Every failure raised by the library carries a machine-readable code.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace hybrid_avoid
