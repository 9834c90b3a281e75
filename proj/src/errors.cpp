#include "torusdiff/errors.hpp"

namespace torusdiff {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::StateSpaceTooLarge: return "StateSpaceTooLarge";
    case ErrorKind::NotElliptic: return "NotElliptic";
    case ErrorKind::MeshTooCoarse: return "MeshTooCoarse";
    case ErrorKind::DegenerateMeasure: return "DegenerateMeasure";
    case ErrorKind::NonUniqueKernel: return "NonUniqueKernel";
    case ErrorKind::NoConvergence: return "NoConvergence";
    case ErrorKind::NoHamiltonian: return "NoHamiltonian";
    case ErrorKind::SolvabilityViolated: return "SolvabilityViolated";
    case ErrorKind::NonPositiveConstant: return "NonPositiveConstant";
    case ErrorKind::ContourHitsSpectrum: return "ContourHitsSpectrum";
    case ErrorKind::QuadratureNotConverged: return "QuadratureNotConverged";
    case ErrorKind::UnsupportedObservable: return "UnsupportedObservable";
    case ErrorKind::StepTooLarge: return "StepTooLarge";
    case ErrorKind::ConfigError: return "ConfigError";
  }
  return "Unknown";
}

Error::Error(ErrorKind kind, const std::string& message)
    : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

void fail(ErrorKind kind, const std::string& message) { throw Error(kind, message); }

}  // namespace torusdiff
