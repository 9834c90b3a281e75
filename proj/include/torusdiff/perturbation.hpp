#pragma once

// Rayleigh-Schrodinger expansion of the stationary density of L0 + eps A
// around nu, the directly solved perturbed measure, and the spectral
// projector of the eigenvalue 0 by contour quadrature.

#include <iosfwd>
#include <limits>
#include <random>
#include <vector>

#include "torusdiff/stationary.hpp"

namespace torusdiff {

/// a / (C0 sqrt(gamma)); throws NonPositiveConstant unless all inputs > 0.
double epsilon_c(double a, double c0, double gamma);

struct RadiusFit {
  bool degenerate = false;  ///< all norms negligible: infinite radius
  double growth = 0.0;      ///< fitted rho, ||f_k|| ~ C rho^k
  double radius = std::numeric_limits<double>::infinity();
  double prefactor = 0.0;
  double r_squared = 0.0;
  int k_min = 2;
  int k_max = 0;
};

struct SeriesResult {
  std::vector<Vector> coefficients;  ///< f_0 .. f_K
  std::vector<double> norms;         ///< ||f_k||_{2,nu}
  std::vector<double> residuals;     ///< ||L0* f_{k+1} + A* f_k|| / ||A* f_k||
  std::vector<double> means;         ///< <f_k>_nu
  std::vector<double> solvability;   ///< <A* f_k>_nu

  int order() const { return static_cast<int>(coefficients.size()) - 1; }
};

enum class DeflationStrategy { Bordered, Grounded };

/// Solves L0* f_{k+1} = -A* f_k with <f_{k+1}>_nu = 0 for k < K, f_0 = 1.
/// Throws SolvabilityViolated if <A* f_k>_nu is not zero.
SeriesResult rs_coefficients(const OperatorMatrix& l0, const OperatorMatrix& a, const Measure& nu,
                             int order, DeflationStrategy strategy = DeflationStrategy::Bordered);

/// Least-squares fit of log ||f_k|| against k over [k_min, K].
RadiusFit empirical_radius(const SeriesResult& series, int k_min = 2);

struct SeriesDensity {
  Vector g;
  Measure measure;
  double renormalization_defect = 0.0;  ///< |<g>_nu - 1|
  bool negative = false;                ///< min g < 0
};

SeriesDensity series_density(const SeriesResult& series, const Measure& nu, double eps, int order);

struct DirectPerturbation {
  Measure measure;
  Vector g;  ///< nu_eps / nu pointwise
};

/// Assembles L0 + eps A from the coefficient fields and solves for its
/// stationary measure.
DirectPerturbation direct_perturbed_measure(const DiffusionSpec& spec, const PerturbationField& c,
                                            const Measure& nu, double eps,
                                            const StationaryOptions& options = {});

struct ProjectorOptions {
  int initial_nodes = 16;
  int max_nodes = 4096;
  double tolerance = 1e-8;
  std::size_t dense_cap = kDenseStateCap;
  /// Verify that exactly one eigenvalue lies inside the contour (dense).
  bool check_separation = true;
};

struct ProjectorResult {
  DenseMatrix projector;
  double radius = 0.0;
  int nodes = 0;
  double idempotency_defect = 0.0;
  double quadrature_change = 0.0;
  int rank = 0;
  double sigma1 = 0.0;
  double sigma2 = 0.0;
  /// Modulus of the nearest nonzero eigenvalue (when checked).
  double nearest_eigenvalue = 0.0;
};

/// P = -(1/2 pi i) oint_{|z| = r} (L - z)^{-1} dz by the trapezoid rule on Q
/// nodes, doubling Q until the result changes by less than the tolerance.
ProjectorResult riesz_projector(const OperatorMatrix& l, double radius,
                                const ProjectorOptions& options = {});

/// P* 1 normalized to nu-mean one; equals nu_eps / nu for the projector of
/// L0 + eps A.
Vector adjoint_projector_density(const ProjectorResult& p, const Measure& nu);

struct RelativeBoundReport {
  int trials = 0;
  std::vector<double> lambdas;
  double worst_slack = std::numeric_limits<double>::infinity();
  double worst_relative_slack = std::numeric_limits<double>::infinity();
  int violations = 0;
  double largest_violation = 0.0;
};

/// Checks ||A f|| <= (C0/sqrt(a)) (||L f|| / lambda + lambda ||f||) on the
/// supplied vectors. `a` is the second-order ellipticity floor.
RelativeBoundReport relative_bound_check(const OperatorMatrix& l0, const OperatorMatrix& a_op,
                                         const Measure& nu, double c0, double a,
                                         const std::vector<Vector>& samples,
                                         const std::vector<double>& lambdas);

/// Random real trigonometric polynomial of degree <= `degree` in each site
/// angle, as a sum of `terms` separable products.
Vector random_trigonometric(const StateSpace& states, int degree, std::mt19937_64& engine,
                            int terms = 4);

/// "k norm residual mean" table.
void write_series_table(std::ostream& out, const SeriesResult& series);

}  // namespace torusdiff
