#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace geogen {

enum class ErrorCode {
  SyntaxError,
  UnknownPredicate,
  ArityMismatch,
  MalformedEntity,
  SlotKindMismatch,
  DanglingReference,
  DuplicateName,
  DivisionByZero,
  Overflow,
  NotPolynomial,
  InconsistentSystem,
  InvalidBinding,
  LimitExceeded,
  UnknownTarget,
  CyclicSubgraph,
  NoCompatibleRelation,
  MissingConstraintTemplate,
  UnsatisfiedAfterRetries,
  NoEligibleTarget,
  MissingTemplate,
  TranslationFailed,
  GatewayError,
  AuthError,
  TransientError,
  RetryExhausted,
  TimeoutError,
  ScriptFormatError,
  GeneratorError,
  IoError,
  InvalidArgument,
};

std::string_view to_string(ErrorCode code);

// Single exception type for the library; callers branch on code().
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace geogen
