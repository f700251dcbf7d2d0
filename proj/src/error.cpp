#include "isotower/error.hpp"

namespace isotower {

const char* to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::ZeroAnchor: return "ZeroAnchor";
    case ErrorCode::NonUnitPhase: return "NonUnitPhase";
    case ErrorCode::NonUnitInput: return "NonUnitInput";
    case ErrorCode::DimMismatch: return "DimMismatch";
    case ErrorCode::DegenerateCoefficient: return "DegenerateCoefficient";
    case ErrorCode::ModeError: return "ModeError";
    case ErrorCode::PoleEvaluation: return "PoleEvaluation";
    case ErrorCode::BracketFailure: return "BracketFailure";
    case ErrorCode::NonConvergence: return "NonConvergence";
    case ErrorCode::IllConditioned: return "IllConditioned";
    case ErrorCode::IndexUnresolvable: return "IndexUnresolvable";
    case ErrorCode::TruncationTooCoarse: return "TruncationTooCoarse";
    case ErrorCode::QuadratureTooCoarse: return "QuadratureTooCoarse";
    case ErrorCode::DegenerateInterval: return "DegenerateInterval";
    case ErrorCode::InsufficientSamples: return "InsufficientSamples";
    case ErrorCode::WindowViolation: return "WindowViolation";
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

Error::Error(ErrorCode code, const std::string& message)
    : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

void fail(ErrorCode code, const std::string& message) { throw Error(code, message); }

}  // namespace isotower
