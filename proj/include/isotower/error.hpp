#pragma once

#include <stdexcept>
#include <string>

namespace isotower {

enum class ErrorCode {
  ZeroAnchor,
  NonUnitPhase,
  NonUnitInput,
  DimMismatch,
  DegenerateCoefficient,
  ModeError,
  PoleEvaluation,
  BracketFailure,
  NonConvergence,
  IllConditioned,
  IndexUnresolvable,
  TruncationTooCoarse,
  QuadratureTooCoarse,
  DegenerateInterval,
  InsufficientSamples,
  WindowViolation,
  ConfigError,
  IoError,
};

const char* to_string(ErrorCode code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message);
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] void fail(ErrorCode code, const std::string& message);

}  // namespace isotower
