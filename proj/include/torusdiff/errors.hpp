#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace torusdiff {

enum class ErrorKind {
  InvalidArgument,
  StateSpaceTooLarge,
  NotElliptic,
  MeshTooCoarse,
  DegenerateMeasure,
  NonUniqueKernel,
  NoConvergence,
  NoHamiltonian,
  SolvabilityViolated,
  NonPositiveConstant,
  ContourHitsSpectrum,
  QuadratureNotConverged,
  UnsupportedObservable,
  StepTooLarge,
  ConfigError,
};

std::string_view to_string(ErrorKind kind);

/// Every failure raised by the library carries one of the kinds above so
/// that the runner can map it onto an exit code.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message);

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] void fail(ErrorKind kind, const std::string& message);

}  // namespace torusdiff
