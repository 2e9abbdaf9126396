#include "coneflank/error.hpp"

namespace coneflank {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::NormalAtSouthPole: return "NormalAtSouthPole";
    case ErrorCode::DegenerateMeanNormal: return "DegenerateMeanNormal";
    case ErrorCode::SyntaxError: return "SyntaxError";
    case ErrorCode::UnknownFunction: return "UnknownFunction";
    case ErrorCode::DomainError: return "DomainError";
    case ErrorCode::IllConditioned: return "IllConditioned";
    case ErrorCode::TooFewSamples: return "TooFewSamples";
    case ErrorCode::DegenerateLine: return "DegenerateLine";
    case ErrorCode::DegenerateDenominator: return "DegenerateDenominator";
    case ErrorCode::SingularSystem: return "SingularSystem";
    case ErrorCode::AmbiguousSide: return "AmbiguousSide";
    case ErrorCode::InvalidBounds: return "InvalidBounds";
    case ErrorCode::ZeroHessian: return "ZeroHessian";
    case ErrorCode::NoRealRuling: return "NoRealRuling";
    case ErrorCode::BranchJump: return "BranchJump";
    case ErrorCode::MultipleRoot: return "MultipleRoot";
    case ErrorCode::RootLost: return "RootLost";
    case ErrorCode::NegativeNoise: return "NegativeNoise";
    case ErrorCode::DegenerateNormal: return "DegenerateNormal";
    case ErrorCode::EmptyGrid: return "EmptyGrid";
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

}  // namespace coneflank
