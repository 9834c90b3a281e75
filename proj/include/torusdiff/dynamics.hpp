#pragma once

// Exact and stochastic evaluation of the semigroup, and the decay,
// truncation and hypercontractivity experiments built on it.

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "torusdiff/expm.hpp"
#include "torusdiff/stationary.hpp"

namespace torusdiff {

struct ExponentialFit {
  double rate = 0.0;       ///< values ~ exp(intercept - rate t)
  double intercept = 0.0;
  double r_squared = 0.0;
  int points = 0;
};

/// Least squares on log(values) over the samples with t >= t_from.
ExponentialFit fit_exponential(std::span<const double> times, std::span<const double> values,
                               double t_from);

struct DecayReport {
  std::string norm;  ///< "l2" or "sup"
  std::vector<double> times;
  std::vector<double> norms;
  /// e^{-gap t} ||f - <f>|| (l2 only).
  std::vector<double> gap_bound;
  /// e^{-(a/gamma) t} ||f - <f>|| (l2 only).
  std::vector<double> lsi_bound;
  ExponentialFit fit;  ///< over the tail window [t_m/2, t_m]
  double gap = 0.0;
  double lsi_rate = 0.0;
  LsiMethod lsi_method = LsiMethod::GapLowerProxy;
  bool gap_bound_holds = true;
  bool lsi_bound_holds = true;
  double worst_gap_ratio = 0.0;  ///< max norm / gap_bound
  double worst_lsi_ratio = 0.0;
  double triple_norm = 0.0;      ///< sup only
  double fitted_constant = 0.0;  ///< sup only: max_t norm e^{rate t} / |||f|||
};

/// ||S_t f - <f>||_{2,nu} against e^{-gap t} and e^{-lsi_rate t} at every grid time.
DecayReport l2_decay_experiment(const OperatorMatrix& l, const Measure& nu, double gap, double lsi_rate,
                                LsiMethod lsi_method, const Vector& f, std::span<const double> times,
                                const SemigroupOptions& options = {});

/// max over mixed second differences (i, j including i = j) divided by h^2.
double triple_norm(const StateSpace& states, double mesh, const Vector& f);

/// sup over `initial_states` (all states when empty) of |S_t f - <f>|.
DecayReport uniform_decay_experiment(const OperatorMatrix& l, const Measure& nu,
                                     const StateSpace& states, double mesh, const Vector& f,
                                     std::span<const double> times,
                                     std::span<const std::size_t> initial_states = {},
                                     const SemigroupOptions& options = {});

/// Function of the angles at fixed lattice points.
struct LocalObservable {
  std::vector<std::vector<int>> support;
  std::function<double(std::span<const double>)> value;
  std::string description;
};

LocalObservable cosine_at_origin(int dimension);

/// Tabulates an observable; throws UnsupportedObservable if it reads a point
/// outside the box.
Vector tabulate_observable(const Lattice& lattice, const StateSpace& states,
                           const LocalObservable& f);

struct TruncationReport {
  int n = 0;
  int n_prime = 0;
  std::vector<double> times;
  std::vector<double> distance;  ///< D(u)
  bool zero_at_start = false;
  bool monotone = false;
  double max_distance = 0.0;
};

using SpecFactory = std::function<DiffusionSpec(int half_width)>;

/// D(u) = max over configurations of the scale-n box (extended by angle 0)
/// of |S_u^(n) f - S_u^(n') f|. Both scales must use Frozen closure.
TruncationReport truncation_experiment(const SpecFactory& factory, const LocalObservable& f,
                                       std::span<const double> times, int n, int n_prime,
                                       const SemigroupOptions& options = {});
/// One report per scale in `scales`, all against the same scale-n' evolution.
std::vector<TruncationReport> truncation_scan(const SpecFactory& factory, const LocalObservable& f,
                                              std::span<const double> times, std::span<const int> scales,
                                              int n_prime, const SemigroupOptions& options = {});

/// (sum nu |f|^p)^{1/p}, evaluated with the sup factored out.
double lp_norm(const Measure& nu, const Vector& f, double p);

/// p(t) = 1 + e^{4t/gamma}.
double gross_exponent(double t, double gamma);

struct HypercontractivityReport {
  double gamma = 0.0;
  std::vector<double> times;
  std::vector<double> exponents;
  std::vector<double> lhs;  ///< ||S_t f||_{p(t), nu}
  double rhs = 0.0;         ///< ||f||_{2, nu}
  double worst_ratio = 0.0;
  bool holds = true;
};

/// Requires a Hamiltonian (reversible model); throws NoHamiltonian otherwise.
HypercontractivityReport hypercontractivity_check(const DiffusionSpec& spec, const OperatorMatrix& l,
                                                  const Measure& nu, double gamma, const Vector& f,
                                                  std::span<const double> times,
                                                  const SemigroupOptions& options = {});

struct PathEnsemble {
  std::uint64_t seed = 0;
  double dt = 0.0;
  double horizon = 0.0;
  std::size_t steps = 0;
  std::size_t paths = 0;
  std::size_t sites = 0;
  std::size_t frames = 0;
  std::size_t record_stride = 0;
  std::vector<double> start;
  /// frames x paths x sites; the last frame is time `horizon`.
  std::vector<double> angles;

  std::span<const double> state(std::size_t frame, std::size_t path) const;
  std::span<const double> final_state(std::size_t path) const { return state(frames - 1, path); }
};

/// Throws StepTooLarge if dt * b_max > 0.1 * 2 pi, InvalidArgument if T is not
/// a multiple of dt.
PathEnsemble euler_maruyama(const DiffusionSpec& spec, std::span<const double> start, double dt,
                            double horizon, std::size_t paths, std::uint64_t seed,
                            std::size_t record_stride = 0, Execution execution = Execution::Parallel);

struct MonteCarloEstimate {
  double mean = 0.0;
  double standard_error = 0.0;
  std::size_t samples = 0;
};

MonteCarloEstimate monte_carlo_expectation(const PathEnsemble& ensemble,
                                           const std::function<double(std::span<const double>)>& f);

/// Mean and standard error of f(X^{dt}_T) - f(X^{2dt}_T) where the coarse path
/// reuses the sums of consecutive fine Brownian increments. Estimates the
/// first-order weak bias of the step dt.
MonteCarloEstimate coupled_step_difference(const DiffusionSpec& spec, std::span<const double> start,
                                           double dt, double horizon, std::size_t paths,
                                           std::uint64_t seed,
                                           const std::function<double(std::span<const double>)>& f);

/// "time,norm,gap_bound,lsi_bound" rows.
void write_decay_csv(std::ostream& out, const DecayReport& report);
/// "frame,path,site,angle" rows.
void write_ensemble_csv(std::ostream& out, const PathEnsemble& ensemble);

}  // namespace torusdiff
