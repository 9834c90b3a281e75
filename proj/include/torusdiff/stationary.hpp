#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "torusdiff/operators.hpp"

namespace torusdiff {

enum class StationaryMethod { Auto, DenseNullSpace, GroundedGmres, GroundedSparseLU };

struct StationaryOptions {
  StationaryMethod method = StationaryMethod::Auto;
  std::size_t dense_cap = kDenseStateCap;
  /// Target for ||nu^T L||_1 / ||L||.
  double tolerance = 1e-10;
  int max_iterations = 2000;
};

/// nu with nu^T L = 0, nu >= 0, sum nu = 1. Dense null space below the dense
/// cap, otherwise GMRES on the system grounded at one state.
Measure stationary_measure(const OperatorMatrix& l, const StationaryOptions& options = {});

/// ||nu^T L||_1 / ||L||_1 with the induced 1-norm.
double stationarity_residual(const OperatorMatrix& l, const Vector& nu);

/// Total variation distance between two measures.
double total_variation(const Vector& p, const Vector& q);

/// max |nu_i L_ij - nu_j L_ji| / max |nu_i L_ij|.
double detailed_balance_residual(const OperatorMatrix& l, const Measure& nu);

enum class LsiMethod { HolleyStroock, GapLowerProxy };
std::string to_string(LsiMethod method);

struct SpectralReport {
  /// Smallest nonzero eigenvalue of -S in L2[nu].
  double gap = 0.0;
  int kernel_dimension = 0;
  std::vector<double> residuals;
  /// Gap eigenvector of S, normalized in L2[nu] and nu-mean zero.
  Vector eigenvector;
  /// Lowest eigenvalues of -S (dense route only).
  std::vector<double> low_spectrum;
  double lsi_gamma = 0.0;
  LsiMethod lsi_method = LsiMethod::GapLowerProxy;
  bool dense = true;
};

struct SpectralOptions {
  std::size_t dense_cap = kDenseStateCap;
  bool force_iterative = false;
  int lanczos_steps = 120;
  double residual_tolerance = 1e-8;
  std::uint64_t seed = 7;
};

/// Gap of the nu-symmetric part S via the similarity D^{1/2} S D^{-1/2}.
SpectralReport spectral_gap(const OperatorMatrix& s, const Measure& nu,
                            const SpectralOptions& options = {});

struct LsiEstimate {
  double gamma = 0.0;
  LsiMethod method = LsiMethod::GapLowerProxy;
  double gamma_uniform = 0.0;
  double oscillation = 0.0;
};

/// LSI constant of the uniform measure on M equispaced circle points for the
/// inequality <f^2 ln(f/||f||)> <= gamma <(D^+ f)^2>, maximized over f.
double uniform_lsi_constant(int points);
/// max H - min H over all grid states.
double hamiltonian_oscillation(const DiffusionSpec& spec);
/// HolleyStroock: gamma_unif * exp(osc H); GapLowerProxy: 1 / gap.
LsiEstimate lsi_constant_estimate(const DiffusionSpec& spec, const SpectralReport& report,
                                  LsiMethod method);

/// "index weight" lines with 17 significant digits.
void write_measure(std::ostream& out, const Measure& nu);
/// Flat key=value record.
void write_spectral_report(std::ostream& out, const SpectralReport& report);

}  // namespace torusdiff
