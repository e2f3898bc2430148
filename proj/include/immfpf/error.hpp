#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace immfpf {

enum class ErrorCode {
  negative_off_diagonal,
  row_sum_nonzero,
  step_too_large,
  non_finite_state,
  stability_violation,
  mass_escape,
  boundary_residual_large,
  segment_shorter_than_burn_in,
  parse_error,
  validation_error,
  io_error,
};

constexpr std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::negative_off_diagonal: return "NegativeOffDiagonal";
    case ErrorCode::row_sum_nonzero: return "RowSumNonzero";
    case ErrorCode::step_too_large: return "StepTooLarge";
    case ErrorCode::non_finite_state: return "NonFiniteState";
    case ErrorCode::stability_violation: return "StabilityViolation";
    case ErrorCode::mass_escape: return "MassEscape";
    case ErrorCode::boundary_residual_large: return "BoundaryResidualLarge";
    case ErrorCode::segment_shorter_than_burn_in: return "SegmentShorterThanBurnIn";
    case ErrorCode::parse_error: return "ParseError";
    case ErrorCode::validation_error: return "ValidationError";
    case ErrorCode::io_error: return "IoError";
  }
  return "Unknown";
}

/// Every failure raised by the library carries one of the codes above so the
/// CLI can map it to a single machine-parsable line.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

inline void require(bool condition, const std::string& message) {
  if (!condition) fail(ErrorCode::validation_error, message);
}

}  // namespace immfpf
