#include "torusdiff/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <iomanip>
#include <limits>
#include <ostream>
#include <random>
#include <sstream>

#include "torusdiff/errors.hpp"

namespace torusdiff {

namespace {

constexpr double kBoundSlack = 1e-9;

void check_times(std::span<const double> times) {
  if (times.empty()) fail(ErrorKind::InvalidArgument, "empty time grid");
  double previous = 0.0;
  for (double t : times) {
    if (!(t >= previous)) fail(ErrorKind::InvalidArgument, "time grid must be nondecreasing and nonnegative");
    previous = t;
  }
}

double wrap_angle(double x) {
  x = std::fmod(x, kTwoPi);
  return x < 0.0 ? x + kTwoPi : x;
}

std::mt19937_64 path_engine(std::uint64_t seed, std::size_t path) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(path), static_cast<std::uint32_t>(std::uint64_t{path} >> 32)};
  return std::mt19937_64(seq);
}

}  // namespace

ExponentialFit fit_exponential(std::span<const double> times, std::span<const double> values,
                               double t_from) {
  std::vector<double> xs, ys;
  for (std::size_t i = 0; i < times.size(); ++i) {
    if (times[i] >= t_from && values[i] > 0.0) {
      xs.push_back(times[i]);
      ys.push_back(std::log(values[i]));
    }
  }
  ExponentialFit fit;
  fit.points = static_cast<int>(xs.size());
  if (xs.size() < 2) return fit;
  const double n = static_cast<double>(xs.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxx += (xs[i] - mx) * (xs[i] - mx);
    sxy += (xs[i] - mx) * (ys[i] - my);
    syy += (ys[i] - my) * (ys[i] - my);
  }
  if (sxx == 0.0) return fit;
  const double slope = sxy / sxx;
  fit.rate = -slope;
  fit.intercept = my - slope * mx;
  double residual = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double r = ys[i] - (fit.intercept + slope * xs[i]);
    residual += r * r;
  }
  fit.r_squared = syy > 0.0 ? 1.0 - residual / syy : 1.0;
  return fit;
}

DecayReport l2_decay_experiment(const OperatorMatrix& l, const Measure& nu, double gap, double lsi_rate,
                                LsiMethod lsi_method, const Vector& f, std::span<const double> times,
                                const SemigroupOptions& options) {
  check_times(times);
  DecayReport report;
  report.norm = "l2";
  report.times.assign(times.begin(), times.end());
  report.gap = gap;
  report.lsi_rate = lsi_rate;
  report.lsi_method = lsi_method;
  const double mean = nu_mean(nu, f);
  const double initial = nu_norm(nu, centered(nu, f));
  const auto path = Semigroup(l, options).trajectory(f, times);
  for (std::size_t k = 0; k < times.size(); ++k) {
    const double value = nu_norm(nu, (path[k].array() - mean).matrix());
    const double gap_bound = std::exp(-gap * times[k]) * initial;
    const double lsi_bound = std::exp(-lsi_rate * times[k]) * initial;
    report.norms.push_back(value);
    report.gap_bound.push_back(gap_bound);
    report.lsi_bound.push_back(lsi_bound);
    if (value > gap_bound * (1.0 + kBoundSlack) + 1e-14) report.gap_bound_holds = false;
    if (value > lsi_bound * (1.0 + kBoundSlack) + 1e-14) report.lsi_bound_holds = false;
    if (gap_bound > 0.0) report.worst_gap_ratio = std::max(report.worst_gap_ratio, value / gap_bound);
    if (lsi_bound > 0.0) report.worst_lsi_ratio = std::max(report.worst_lsi_ratio, value / lsi_bound);
  }
  report.fit = fit_exponential(times, report.norms, 0.5 * times.back());
  return report;
}

double triple_norm(const StateSpace& states, double mesh, const Vector& f) {
  const std::size_t sites = states.sites();
  const double h2 = mesh * mesh;
  double best = 0.0;
  for (std::size_t x = 0; x < states.size(); ++x) {
    for (std::size_t i = 0; i < sites; ++i) {
      const double pure = f[states.shift(x, i, 1)] - 2.0 * f[x] + f[states.shift(x, i, -1)];
      best = std::max(best, std::abs(pure) / h2);
      for (std::size_t j = i + 1; j < sites; ++j) {
        const std::size_t ip = states.shift(x, i, 1), im = states.shift(x, i, -1);
        const double mixed = f[states.shift(ip, j, 1)] - f[states.shift(ip, j, -1)] -
                             f[states.shift(im, j, 1)] + f[states.shift(im, j, -1)];
        best = std::max(best, std::abs(mixed) / (4.0 * h2));
      }
    }
  }
  return best;
}

DecayReport uniform_decay_experiment(const OperatorMatrix& l, const Measure& nu,
                                     const StateSpace& states, double mesh, const Vector& f,
                                     std::span<const double> times,
                                     std::span<const std::size_t> initial_states,
                                     const SemigroupOptions& options) {
  check_times(times);
  DecayReport report;
  report.norm = "sup";
  report.times.assign(times.begin(), times.end());
  const double mean = nu_mean(nu, f);
  const auto path = Semigroup(l, options).trajectory(f, times);
  for (std::size_t k = 0; k < times.size(); ++k) {
    double sup = 0.0;
    if (initial_states.empty()) {
      sup = (path[k].array() - mean).abs().maxCoeff();
    } else {
      for (std::size_t s : initial_states) sup = std::max(sup, std::abs(path[k][s] - mean));
    }
    report.norms.push_back(sup);
  }
  report.fit = fit_exponential(times, report.norms, 0.5 * times.back());
  report.triple_norm = triple_norm(states, mesh, f);
  if (report.triple_norm > 0.0) {
    for (std::size_t k = 0; k < times.size(); ++k)
      report.fitted_constant = std::max(report.fitted_constant,
                                        report.norms[k] * std::exp(report.fit.rate * times[k]) /
                                            report.triple_norm);
  }
  return report;
}

LocalObservable cosine_at_origin(int dimension) {
  return {{std::vector<int>(static_cast<std::size_t>(dimension), 0)},
          [](std::span<const double> x) { return std::cos(x[0]); },
          "cos(eta_0)"};
}

Vector tabulate_observable(const Lattice& lattice, const StateSpace& states, const LocalObservable& f) {
  std::vector<std::size_t> sites;
  for (const auto& point : f.support) {
    if (static_cast<int>(point.size()) != lattice.dimension())
      fail(ErrorKind::InvalidArgument, "observable support point has the wrong dimension");
    for (int c : point) {
      if (std::abs(c) > lattice.half_width()) {
        std::ostringstream msg;
        msg << "observable '" << f.description << "' reads outside the box of half width "
            << lattice.half_width();
        fail(ErrorKind::UnsupportedObservable, msg.str());
      }
    }
    sites.push_back(*lattice.site_at(point));
  }
  Vector out(static_cast<Eigen::Index>(states.size()));
  std::vector<double> angles(states.sites()), local(sites.size());
  for (std::size_t x = 0; x < states.size(); ++x) {
    states.angles(x, angles);
    for (std::size_t k = 0; k < sites.size(); ++k) local[k] = angles[sites[k]];
    out[static_cast<Eigen::Index>(x)] = f.value(local);
  }
  return out;
}

TruncationReport truncation_experiment(const SpecFactory& factory, const LocalObservable& f,
                                       std::span<const double> times, int n, int n_prime,
                                       const SemigroupOptions& options) {
  const int scales[] = {n};
  return truncation_scan(factory, f, times, scales, n_prime, options).front();
}

std::vector<TruncationReport> truncation_scan(const SpecFactory& factory, const LocalObservable& f,
                                              std::span<const double> times, std::span<const int> scales,
                                              int n_prime, const SemigroupOptions& options) {
  check_times(times);
  for (int n : scales)
    if (n < 0 || n_prime <= n) fail(ErrorKind::InvalidArgument, "truncation scales need 0 <= n < n'");
  const DiffusionSpec large = factory(n_prime);
  if (large.lattice.closure() != Closure::Frozen) fail(ErrorKind::InvalidArgument, "truncation compares Frozen boxes");
  const StateSpace large_states = large.states();
  const Vector f_large = tabulate_observable(large.lattice, large_states, f);
  const OperatorMatrix l_large = assemble_generator(large);
  const auto path_large = Semigroup(l_large, options).trajectory(f_large, times);

  std::vector<TruncationReport> reports;
  for (int n : scales) {
    const DiffusionSpec small = factory(n);
    if (small.lattice.closure() != Closure::Frozen) fail(ErrorKind::InvalidArgument, "truncation compares Frozen boxes");
    if (small.grid.points() != large.grid.points())
      fail(ErrorKind::InvalidArgument, "truncation scales must share the grid");
    const StateSpace small_states = small.states();
    const Vector f_small = tabulate_observable(small.lattice, small_states, f);

    std::vector<std::size_t> site_map(small.lattice.site_count());
    for (std::size_t s = 0; s < site_map.size(); ++s) site_map[s] = *large.lattice.site_at(small.lattice.coords(s));
    std::vector<std::size_t> embed(small_states.size());
    std::vector<int> digits(small_states.sites()), wide(large_states.sites());
    for (std::size_t x = 0; x < small_states.size(); ++x) {
      small_states.decode(x, digits);
      std::fill(wide.begin(), wide.end(), 0);
      for (std::size_t s = 0; s < digits.size(); ++s) wide[site_map[s]] = digits[s];
      embed[x] = large_states.encode(wide);
    }

    const OperatorMatrix l_small = assemble_generator(small);
    const auto path_small = Semigroup(l_small, options).trajectory(f_small, times);

    TruncationReport report;
    report.n = n;
    report.n_prime = n_prime;
    report.times.assign(times.begin(), times.end());
    for (std::size_t k = 0; k < times.size(); ++k) {
      double d = 0.0;
      for (std::size_t x = 0; x < embed.size(); ++x)
        d = std::max(d, std::abs(path_small[k][static_cast<Eigen::Index>(x)] -
                                 path_large[k][static_cast<Eigen::Index>(embed[x])]));
      report.distance.push_back(d);
      report.max_distance = std::max(report.max_distance, d);
    }
    report.zero_at_start = times.front() > 0.0 || report.distance.front() <= 1e-14;
    report.monotone = true;
    for (std::size_t k = 1; k < times.size(); ++k)
      if (report.distance[k] < report.distance[k - 1] - 1e-12) report.monotone = false;
    reports.push_back(std::move(report));
  }
  return reports;
}

double lp_norm(const Measure& nu, const Vector& f, double p) {
  if (!(p >= 1.0)) fail(ErrorKind::InvalidArgument, "L_p norm needs p >= 1");
  const double top = f.cwiseAbs().maxCoeff();
  if (top == 0.0) return 0.0;
  if (std::isinf(p)) return top;
  double sum = 0.0;
  for (Eigen::Index i = 0; i < f.size(); ++i) sum += nu.weights[i] * std::pow(std::abs(f[i]) / top, p);
  return top * std::pow(sum, 1.0 / p);
}

double gross_exponent(double t, double gamma) {
  if (!(gamma > 0.0)) fail(ErrorKind::NonPositiveConstant, "log-Sobolev constant must be positive");
  return 1.0 + std::exp(4.0 * t / gamma);
}

HypercontractivityReport hypercontractivity_check(const DiffusionSpec& spec, const OperatorMatrix& l,
                                                  const Measure& nu, double gamma, const Vector& f,
                                                  std::span<const double> times,
                                                  const SemigroupOptions& options) {
  if (!spec.hamiltonian) fail(ErrorKind::NoHamiltonian, "hypercontractivity needs a reversible model");
  check_times(times);
  HypercontractivityReport report;
  report.gamma = gamma;
  report.times.assign(times.begin(), times.end());
  report.rhs = lp_norm(nu, f, 2.0);
  const auto path = Semigroup(l, options).trajectory(f, times);
  for (std::size_t k = 0; k < times.size(); ++k) {
    const double p = gross_exponent(times[k], gamma);
    const double lhs = lp_norm(nu, path[k], p);
    report.exponents.push_back(p);
    report.lhs.push_back(lhs);
    if (report.rhs > 0.0) report.worst_ratio = std::max(report.worst_ratio, lhs / report.rhs);
    if (lhs > report.rhs * (1.0 + kBoundSlack) + 1e-14) report.holds = false;
  }
  return report;
}

std::span<const double> PathEnsemble::state(std::size_t frame, std::size_t path) const {
  return {angles.data() + (frame * paths + path) * sites, sites};
}

namespace {

std::size_t step_count(double dt, double horizon) {
  if (!(dt > 0.0) || !(horizon >= 0.0)) fail(ErrorKind::InvalidArgument, "need dt > 0 and T >= 0");
  const double ratio = horizon / dt;
  const double rounded = std::round(ratio);
  if (std::abs(ratio - rounded) > 1e-9 * std::max(1.0, ratio))
    fail(ErrorKind::InvalidArgument, "horizon must be a multiple of dt");
  return static_cast<std::size_t>(rounded);
}

void check_step(const DiffusionSpec& spec, double dt) {
  if (dt * spec.coefficients.b_max > 0.1 * kTwoPi) {
    std::ostringstream msg;
    msg << "dt * b_max = " << dt * spec.coefficients.b_max << " exceeds 0.1 * 2 pi";
    fail(ErrorKind::StepTooLarge, msg.str());
  }
}

}  // namespace

PathEnsemble euler_maruyama(const DiffusionSpec& spec, std::span<const double> start, double dt,
                            double horizon, std::size_t paths, std::uint64_t seed,
                            std::size_t record_stride, Execution execution) {
  if (start.size() != spec.lattice.site_count())
    fail(ErrorKind::InvalidArgument, "start configuration has the wrong number of sites");
  check_step(spec, dt);
  kernels::PathInput input;
  input.lattice = &spec.lattice;
  input.diffusion = &spec.coefficients.diffusion;
  input.drift = &spec.coefficients.drift;
  std::vector<double> wrapped(start.begin(), start.end());
  for (double& x : wrapped) x = wrap_angle(x);
  input.start = wrapped;
  input.dt = dt;
  input.steps = step_count(dt, horizon);
  input.seed = seed;
  input.record_stride = record_stride;
  kernels::PathOutput out = execution == Execution::Serial
                                ? kernels::euler_maruyama_serial(input, paths)
                                : kernels::euler_maruyama_parallel(input, paths);
  PathEnsemble ensemble;
  ensemble.seed = seed;
  ensemble.dt = dt;
  ensemble.horizon = horizon;
  ensemble.steps = input.steps;
  ensemble.paths = out.paths;
  ensemble.sites = out.sites;
  ensemble.frames = out.frames;
  ensemble.record_stride = record_stride;
  ensemble.start = std::move(wrapped);
  ensemble.angles = std::move(out.angles);
  return ensemble;
}

MonteCarloEstimate monte_carlo_expectation(const PathEnsemble& ensemble,
                                           const std::function<double(std::span<const double>)>& f) {
  MonteCarloEstimate est;
  est.samples = ensemble.paths;
  if (ensemble.paths == 0) return est;
  double sum = 0.0, sum_sq = 0.0;
  for (std::size_t p = 0; p < ensemble.paths; ++p) {
    const double v = f(ensemble.final_state(p));
    sum += v;
    sum_sq += v * v;
  }
  const double n = static_cast<double>(ensemble.paths);
  est.mean = sum / n;
  if (ensemble.paths > 1) {
    const double var = std::max(0.0, (sum_sq - n * est.mean * est.mean) / (n - 1.0));
    est.standard_error = std::sqrt(var / n);
  }
  return est;
}

MonteCarloEstimate coupled_step_difference(const DiffusionSpec& spec, std::span<const double> start,
                                           double dt, double horizon, std::size_t paths,
                                           std::uint64_t seed,
                                           const std::function<double(std::span<const double>)>& f) {
  check_step(spec, 2.0 * dt);
  const std::size_t steps = step_count(dt, horizon);
  if (steps % 2 != 0) fail(ErrorKind::InvalidArgument, "coupled estimate needs an even step count");
  const std::size_t sites = spec.lattice.site_count();
  if (start.size() != sites) fail(ErrorKind::InvalidArgument, "start configuration has the wrong number of sites");
  std::vector<double> diffs(paths);
  const auto count = static_cast<std::int64_t>(paths);
#pragma omp parallel
  {
    Configuration fine(spec.lattice, std::vector<double>(start.begin(), start.end()));
    Configuration coarse(spec.lattice, std::vector<double>(start.begin(), start.end()));
    std::vector<double> drift(sites), sigma(sites), xi(sites);
#pragma omp for schedule(dynamic, 64)
    for (std::int64_t p = 0; p < count; ++p) {
      auto engine = path_engine(seed, static_cast<std::size_t>(p));
      std::normal_distribution<double> normal(0.0, 1.0);
      auto& x = fine.mutable_angles();
      auto& y = coarse.mutable_angles();
      for (std::size_t s = 0; s < sites; ++s) x[s] = y[s] = wrap_angle(start[s]);
      const double root = std::sqrt(dt);
      for (std::size_t step = 0; step < steps; step += 2) {
        std::fill(xi.begin(), xi.end(), 0.0);
        for (int half = 0; half < 2; ++half) {
          for (std::size_t s = 0; s < sites; ++s) {
            drift[s] = spec.coefficients.drift(fine, s);
            sigma[s] = std::sqrt(spec.coefficients.diffusion(fine, s)) * root;
          }
          for (std::size_t s = 0; s < sites; ++s) {
            const double z = normal(engine);
            xi[s] += z;
            x[s] = wrap_angle(x[s] + drift[s] * dt + sigma[s] * z);
          }
        }
        for (std::size_t s = 0; s < sites; ++s) {
          drift[s] = spec.coefficients.drift(coarse, s);
          sigma[s] = std::sqrt(spec.coefficients.diffusion(coarse, s)) * root;
        }
        for (std::size_t s = 0; s < sites; ++s)
          y[s] = wrap_angle(y[s] + drift[s] * 2.0 * dt + sigma[s] * xi[s]);
      }
      diffs[static_cast<std::size_t>(p)] = f(fine.angles()) - f(coarse.angles());
    }
  }
  MonteCarloEstimate est;
  est.samples = paths;
  if (paths == 0) return est;
  double sum = 0.0, sum_sq = 0.0;
  for (double v : diffs) {
    sum += v;
    sum_sq += v * v;
  }
  const double n = static_cast<double>(paths);
  est.mean = sum / n;
  if (paths > 1) est.standard_error = std::sqrt(std::max(0.0, (sum_sq - n * est.mean * est.mean) / (n - 1.0)) / n);
  return est;
}

void write_decay_csv(std::ostream& out, const DecayReport& report) {
  out << "# time,norm,gap_bound,lsi_bound (norm: " << report.norm << ")\n";
  out << std::setprecision(17);
  for (std::size_t k = 0; k < report.times.size(); ++k) {
    out << report.times[k] << ',' << report.norms[k] << ',';
    if (k < report.gap_bound.size()) out << report.gap_bound[k];
    out << ',';
    if (k < report.lsi_bound.size()) out << report.lsi_bound[k];
    out << '\n';
  }
}

void write_ensemble_csv(std::ostream& out, const PathEnsemble& ensemble) {
  out << "# frame,path,site,angle (seed " << ensemble.seed << ", dt " << ensemble.dt << ", T "
      << ensemble.horizon << ")\n";
  out << std::setprecision(17);
  for (std::size_t fr = 0; fr < ensemble.frames; ++fr)
    for (std::size_t p = 0; p < ensemble.paths; ++p) {
      const auto x = ensemble.state(fr, p);
      for (std::size_t s = 0; s < ensemble.sites; ++s) out << fr << ',' << p << ',' << s << ',' << x[s] << '\n';
    }
}

}  // namespace torusdiff
