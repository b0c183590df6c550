#include "contrafair/error.hpp"

namespace contrafair {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
    case ErrorCode::kCycleDetected: return "CycleDetected";
    case ErrorCode::kProtectedHasParent: return "ProtectedHasParent";
    case ErrorCode::kOutcomeHasChildren: return "OutcomeHasChildren";
    case ErrorCode::kDanglingEdge: return "DanglingEdge";
    case ErrorCode::kEmptyRoles: return "EmptyRoles";
    case ErrorCode::kDuplicateVariable: return "DuplicateVariable";
    case ErrorCode::kInvalidDomain: return "InvalidDomain";
    case ErrorCode::kInsufficientData: return "InsufficientData";
    case ErrorCode::kSingularDesign: return "SingularDesign";
    case ErrorCode::kMissingValue: return "MissingValue";
    case ErrorCode::kUnknownProtected: return "UnknownProtected";
    case ErrorCode::kDomainViolation: return "DomainViolation";
    case ErrorCode::kSchemaMismatch: return "SchemaMismatch";
    case ErrorCode::kNonFiniteLoss: return "NonFiniteLoss";
    case ErrorCode::kMissingOutcome: return "MissingOutcome";
    case ErrorCode::kEmptyBatch: return "EmptyBatch";
    case ErrorCode::kContinuousProtectedUnenumerable:
      return "ContinuousProtectedUnenumerable";
    case ErrorCode::kSameDecision: return "SameDecision";
    case ErrorCode::kSameIndividual: return "SameIndividual";
    case ErrorCode::kUnknownSnapshot: return "UnknownSnapshot";
    case ErrorCode::kEmptyGroup: return "EmptyGroup";
    case ErrorCode::kEmptyConditionedGroup: return "EmptyConditionedGroup";
    case ErrorCode::kInvalidMarginal: return "InvalidMarginal";
    case ErrorCode::kDomainTooLarge: return "DomainTooLarge";
    case ErrorCode::kParseError: return "ParseError";
    case ErrorCode::kDuplicateTimestamp: return "DuplicateTimestamp";
    case ErrorCode::kConfigConflict: return "ConfigConflict";
    case ErrorCode::kIoError: return "IoError";
  }
  return "Unknown";
}

Error::Error(ErrorCode code, const std::string& message)
    : std::runtime_error(std::string(to_string(code)) + ": " + message),
      code_(code),
      detail_(message) {}

}  // namespace contrafair
