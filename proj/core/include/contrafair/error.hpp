#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace contrafair {

// Failure categories surfaced by every module. The CLI maps any of these to
// exit status 1.
enum class ErrorCode {
  kInvalidArgument,
  // graph validation
  kCycleDetected,
  kProtectedHasParent,
  kOutcomeHasChildren,
  kDanglingEdge,
  kEmptyRoles,
  kDuplicateVariable,
  kInvalidDomain,
  // scm fitting and inference
  kInsufficientData,
  kSingularDesign,
  kMissingValue,
  kUnknownProtected,
  kDomainViolation,
  // predictors
  kSchemaMismatch,
  kNonFiniteLoss,
  kMissingOutcome,
  kEmptyBatch,
  // fairness checks
  kContinuousProtectedUnenumerable,
  kSameDecision,
  kSameIndividual,
  kUnknownSnapshot,
  kEmptyGroup,
  kEmptyConditionedGroup,
  // synth
  kInvalidMarginal,
  kDomainTooLarge,
  // io and orchestration
  kParseError,
  kDuplicateTimestamp,
  kConfigConflict,
  kIoError,
};

std::string_view to_string(ErrorCode code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message);

  ErrorCode code() const noexcept { return code_; }
  // Message without the code prefix.
  const std::string& detail() const noexcept { return detail_; }

 private:
  ErrorCode code_;
  std::string detail_;
};

}  // namespace contrafair
