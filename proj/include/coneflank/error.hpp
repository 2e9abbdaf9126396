#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>

namespace coneflank {

enum class ErrorCode {
  NormalAtSouthPole,
  DegenerateMeanNormal,
  SyntaxError,
  UnknownFunction,
  DomainError,
  IllConditioned,
  TooFewSamples,
  DegenerateLine,
  DegenerateDenominator,
  SingularSystem,
  AmbiguousSide,
  InvalidBounds,
  ZeroHessian,
  NoRealRuling,
  BranchJump,
  MultipleRoot,
  RootLost,
  NegativeNoise,
  DegenerateNormal,
  EmptyGrid,
  ConfigError,
  IoError,
};

std::string_view to_string(ErrorCode code);

// Every failure in the library is reported through this exception type.
// `position` is only meaningful for SyntaxError (byte offset into the input).
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what, std::size_t position = 0)
      : std::runtime_error(std::string(to_string(code)) + ": " + what),
        code_(code),
        position_(position) {}

  ErrorCode code() const noexcept { return code_; }
  std::size_t position() const noexcept { return position_; }

 private:
  ErrorCode code_;
  std::size_t position_;
};

}  // namespace coneflank
