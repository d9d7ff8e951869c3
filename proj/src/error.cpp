#include "geogen/error.hpp"

namespace geogen {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::SyntaxError: return "SyntaxError";
    case ErrorCode::UnknownPredicate: return "UnknownPredicate";
    case ErrorCode::ArityMismatch: return "ArityMismatch";
    case ErrorCode::MalformedEntity: return "MalformedEntity";
    case ErrorCode::SlotKindMismatch: return "SlotKindMismatch";
    case ErrorCode::DanglingReference: return "DanglingReference";
    case ErrorCode::DuplicateName: return "DuplicateName";
    case ErrorCode::DivisionByZero: return "DivisionByZero";
    case ErrorCode::Overflow: return "Overflow";
    case ErrorCode::NotPolynomial: return "NotPolynomial";
    case ErrorCode::InconsistentSystem: return "InconsistentSystem";
    case ErrorCode::InvalidBinding: return "InvalidBinding";
    case ErrorCode::LimitExceeded: return "LimitExceeded";
    case ErrorCode::UnknownTarget: return "UnknownTarget";
    case ErrorCode::CyclicSubgraph: return "CyclicSubgraph";
    case ErrorCode::NoCompatibleRelation: return "NoCompatibleRelation";
    case ErrorCode::MissingConstraintTemplate: return "MissingConstraintTemplate";
    case ErrorCode::UnsatisfiedAfterRetries: return "UnsatisfiedAfterRetries";
    case ErrorCode::NoEligibleTarget: return "NoEligibleTarget";
    case ErrorCode::MissingTemplate: return "MissingTemplate";
    case ErrorCode::TranslationFailed: return "TranslationFailed";
    case ErrorCode::GatewayError: return "GatewayError";
    case ErrorCode::AuthError: return "AuthError";
    case ErrorCode::TransientError: return "TransientError";
    case ErrorCode::RetryExhausted: return "RetryExhausted";
    case ErrorCode::TimeoutError: return "TimeoutError";
    case ErrorCode::ScriptFormatError: return "ScriptFormatError";
    case ErrorCode::GeneratorError: return "GeneratorError";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
  }
  return "Unknown";
}

}  // namespace geogen
