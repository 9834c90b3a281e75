// Acceptance run on the two desk models:
//   (i)  one site, M in {8, 16, 32}, H = 0.5 cos(eta_0), A = d_0;
//   (ii) three sites (d = 1, n = 1), Frozen, H = sum 0.5 cos(eta_i - eta_{i+1}), A = d_0.
// Prints one PASS/FAIL line per criterion; exits 1 if any fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "torusdiff/config.hpp"
#include "torusdiff/dynamics.hpp"
#include "torusdiff/experiments.hpp"
#include "torusdiff/operators.hpp"
#include "torusdiff/perturbation.hpp"
#include "torusdiff/stationary.hpp"

using namespace torusdiff;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(double x) {
  std::ostringstream s;
  s.precision(3);
  s << x;
  return s.str();
}

struct Model {
  DiffusionSpec spec;
  PerturbationField c;
  OperatorMatrix l0;
  OperatorMatrix a;
  Measure nu;
};

Model build(DiffusionSpec spec, StationaryMethod method = StationaryMethod::Auto) {
  auto c = origin_derivative(spec.lattice);
  auto l0 = assemble_generator(spec);
  auto a = assemble_first_order(c, spec.lattice, spec.grid);
  StationaryOptions opts;
  opts.method = method;
  auto nu = stationary_measure(l0, opts);
  return {std::move(spec), std::move(c), std::move(l0), std::move(a), std::move(nu)};
}

DiffusionSpec model_i(int m) { return build_ibm_model({onsite_cosine(1, 0.5)}, Lattice(1, 0), Grid(m)); }
DiffusionSpec model_ii(int m) {
  return build_ibm_model({pair_cosine(1, 0, 0.5)}, Lattice(1, 1, Closure::Frozen), Grid(m));
}

std::vector<Vector> random_functions(const StateSpace& states, int count, int degree, std::uint64_t seed) {
  std::mt19937_64 engine(seed);
  std::vector<Vector> out;
  for (int i = 0; i < count; ++i) out.push_back(random_trigonometric(states, degree, engine));
  return out;
}

double slope(const std::vector<double>& x, const std::vector<double>& y) {
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += std::log(x[i]);
    my += std::log(y[i]);
  }
  mx /= static_cast<double>(x.size());
  my /= static_cast<double>(y.size());
  double sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (std::log(x[i]) - mx) * (std::log(x[i]) - mx);
    sxy += (std::log(x[i]) - mx) * (std::log(y[i]) - my);
  }
  return sxy / sxx;
}

std::vector<double> time_grid(double tmax, int points) {
  std::vector<double> t;
  for (int k = 1; k <= points; ++k) t.push_back(tmax * k / points);
  return t;
}

Outcome stationarity() {
  double worst_residual = 0.0, worst_tv = 0.0;
  std::vector<DiffusionSpec> specs;
  for (int m : {8, 16, 32}) specs.push_back(model_i(m));
  for (int m : {6, 8, 10, 12}) specs.push_back(model_ii(m));
  for (const auto& spec : specs) {
    const auto l = assemble_generator(spec);
    StationaryOptions iterative, dense;
    iterative.method = StationaryMethod::GroundedGmres;
    dense.method = StationaryMethod::DenseNullSpace;
    const auto a = stationary_measure(l, iterative);
    const auto b = stationary_measure(l, dense);
    worst_residual = std::max({worst_residual, stationarity_residual(l, a.weights), stationarity_residual(l, b.weights)});
    worst_tv = std::max(worst_tv, total_variation(a.weights, b.weights));
  }
  return {worst_residual <= 1e-10 && worst_tv <= 1e-8,
          "max residual " + fmt(worst_residual) + " <= 1e-10, gmres vs dense TV " + fmt(worst_tv) + " <= 1e-8"};
}

Outcome dirichlet_order() {
  const std::vector<int> meshes{8, 16, 32};
  std::vector<std::vector<double>> errors(20);
  std::vector<double> h;
  for (int m : meshes) {
    const auto md = build(model_i(m));
    h.push_back(md.spec.grid.mesh());
    const auto fs = random_functions(md.spec.states(), 20, 1, 2024);
    for (std::size_t i = 0; i < fs.size(); ++i) {
      const auto form = dirichlet_form(md.l0, md.spec, md.nu, fs[i]);
      errors[i].push_back(std::abs(form.lhs - form.rhs));
    }
  }
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (const auto& e : errors) {
    const double order = slope(h, e);
    lo = std::min(lo, order);
    hi = std::max(hi, order);
  }
  return {lo >= 1.8 && hi <= 2.2, "fitted orders in [" + fmt(lo) + ", " + fmt(hi) + "] within [1.8, 2.2]"};
}

Outcome adjoint_exactness() {
  double worst = 0.0;
  for (const auto& spec : {model_i(16), model_ii(8)}) {
    const auto md = build(spec);
    const auto adj = nu_adjoint(md.l0, md.nu);
    const auto f = random_functions(md.spec.states(), 100, 3, 1);
    const auto g = random_functions(md.spec.states(), 100, 3, 2);
    for (int i = 0; i < 100; ++i) {
      const Vector lf = md.l0.apply(f[i]);
      const double lhs = nu_inner(md.nu, g[i], lf);
      const double rhs = nu_inner(md.nu, adj.apply(g[i]), f[i]);
      worst = std::max(worst, std::abs(lhs - rhs) / (nu_norm(md.nu, g[i]) * nu_norm(md.nu, lf)));
    }
  }
  return {worst <= 1e-12, "max relative defect " + fmt(worst) + " <= 1e-12"};
}

Outcome recurrence() {
  double residual = 0.0, mean = 0.0;
  for (const auto& spec : {model_i(16), model_ii(8)}) {
    const auto md = build(spec);
    const auto s = rs_coefficients(md.l0, md.a, md.nu, 6);
    for (double r : s.residuals) residual = std::max(residual, r);
    for (std::size_t k = 1; k < s.means.size(); ++k) mean = std::max(mean, std::abs(s.means[k]));
  }
  return {residual <= 1e-9 && mean <= 1e-12,
          "max residual " + fmt(residual) + " <= 1e-9, max |<f_k>| " + fmt(mean) + " <= 1e-12"};
}

Outcome first_order_term() {
  const auto md = build(model_i(16));
  const auto s = rs_coefficients(md.l0, md.a, md.nu, 1);
  // Density form: L0^T (nu f_1) = -A^T nu with zero total mass, solved densely.
  const Eigen::Index n = md.l0.size();
  Eigen::MatrixXd k(n + 1, n);
  k.topRows(n) = md.l0.dense().transpose();
  k.row(n).setOnes();
  Eigen::VectorXd rhs(n + 1);
  rhs.head(n) = -(md.a.dense().transpose() * md.nu.weights);
  rhs[n] = 0.0;
  const Vector want = Vector(k.completeOrthogonalDecomposition().solve(rhs)).cwiseQuotient(md.nu.weights);
  const double rel = nu_norm(md.nu, Vector(s.coefficients[1] - want)) / nu_norm(md.nu, want);
  return {rel <= 1e-9, "relative difference " + fmt(rel) + " <= 1e-9"};
}

struct SeriesContext {
  Model md;
  SeriesResult series;
  RadiusFit fit;
};

SeriesContext series_context() {
  auto md = build(model_i(16));
  auto series = rs_coefficients(md.l0, md.a, md.nu, 6);
  auto fit = empirical_radius(series, 2);
  return {std::move(md), std::move(series), fit};
}

Outcome series_vs_direct() {
  const auto ctx = series_context();
  const double eps = 0.1 * ctx.fit.radius;
  const auto direct = direct_perturbed_measure(ctx.md.spec, ctx.md.c, ctx.md.nu, eps);
  std::vector<double> err;
  for (int k = 0; k <= 6; ++k) {
    const auto d = series_density(ctx.series, ctx.md.nu, eps, k);
    err.push_back(nu_norm(ctx.md.nu, Vector(d.g - direct.g)));
  }
  double worst_ratio = 0.0;
  for (int k = 1; k <= 6; ++k) worst_ratio = std::max(worst_ratio, err[k] / err[k - 1]);
  const double total = err[6] / err[0];
  return {worst_ratio <= 0.15 && total <= 1e-4,
          "eps " + fmt(eps) + ", worst ratio " + fmt(worst_ratio) + " <= 0.15, err(6)/err(0) " + fmt(total) + " <= 1e-4"};
}

Outcome coefficient_growth() {
  const auto ctx = series_context();
  const auto& spec = ctx.md.spec;
  const auto report = spectral_gap(symmetrize(ctx.md.l0, ctx.md.nu).symmetric, ctx.md.nu);
  const double gamma = lsi_constant_estimate(spec, report, LsiMethod::HolleyStroock).gamma;
  const double a = second_order_floor(spec.coefficients, spec.lattice, spec.grid);
  const double critical = epsilon_c(a, compute_C0(ctx.md.c, spec.lattice, spec.grid), gamma);
  const bool fit_ok = ctx.fit.r_squared >= 0.99;
  const bool radius_ok = ctx.fit.radius >= critical;
  return {fit_ok && radius_ok, "R^2 " + fmt(ctx.fit.r_squared) + " >= 0.99, radius " + fmt(ctx.fit.radius) +
                                   " >= eps_c " + fmt(critical) + " (gamma_HS " + fmt(gamma) + ")"};
}

Outcome riesz_projector_check() {
  const auto ctx = series_context();
  const auto& md = ctx.md;
  const double gap = spectral_gap(symmetrize(md.l0, md.nu).symmetric, md.nu).gap;
  const auto p0 = riesz_projector(md.l0, gap / 2);
  const DenseMatrix rank_one = Vector::Ones(md.l0.size()) * md.nu.weights.transpose();
  const double p0_error = (p0.projector - rank_one).cwiseAbs().maxCoeff();
  const double eps = 0.1 * ctx.fit.radius;
  const auto peps = riesz_projector(assemble_perturbed_generator(md.spec, md.c, eps), gap / 2);
  const auto direct = direct_perturbed_measure(md.spec, md.c, md.nu, eps);
  const double density_error = (adjoint_projector_density(peps, md.nu) - direct.g).cwiseAbs().maxCoeff();
  const double idem = std::max(p0.idempotency_defect, peps.idempotency_defect);
  const bool ok = idem <= 1e-8 && p0.rank == 1 && peps.rank == 1 && p0_error <= 1e-8 && density_error <= 1e-6;
  return {ok, "idempotency " + fmt(idem) + " <= 1e-8, ranks " + std::to_string(p0.rank) + "/" +
                  std::to_string(peps.rank) + ", |P0 - 1 nu^T| " + fmt(p0_error) + " <= 1e-8, density " +
                  fmt(density_error) + " <= 1e-6"};
}

Outcome relative_boundedness() {
  std::vector<double> h, violation;
  int total_violations = 0;
  for (int m : {8, 16, 32}) {
    const auto md = build(model_i(m));
    const double a = second_order_floor(md.spec.coefficients, md.spec.lattice, md.spec.grid);
    const double c0 = compute_C0(md.c, md.spec.lattice, md.spec.grid);
    const auto samples = random_functions(md.spec.states(), 1000, 3, 9);
    const auto r = relative_bound_check(md.l0, md.a, md.nu, c0, a, samples, {0.1, 1.0, 10.0});
    total_violations += r.violations;
    h.push_back(md.spec.grid.mesh());
    violation.push_back(r.largest_violation);
  }
  if (total_violations == 0) return {true, "no violations in 3 x 1000 x 3 trials (M = 8, 16, 32)"};
  bool shrinking = true;
  for (std::size_t i = 1; i < violation.size(); ++i)
    if (violation[i - 1] > 0.0 && violation[i] > violation[i - 1] / 3.0) shrinking = false;
  return {shrinking, std::to_string(total_violations) + " violations, largest per mesh " + fmt(violation[0]) + ", " +
                         fmt(violation[1]) + ", " + fmt(violation[2]) + " (must shrink O(h^2))"};
}

Outcome l2_decay() {
  const auto md = build(model_i(16));
  const auto report = spectral_gap(symmetrize(md.l0, md.nu).symmetric, md.nu);
  const auto lsi = lsi_constant_estimate(md.spec, report, LsiMethod::HolleyStroock);
  const double a = second_order_floor(md.spec.coefficients, md.spec.lattice, md.spec.grid);
  const auto times = time_grid(5.0, 20);
  double worst = 0.0;
  for (const auto& f : random_functions(md.spec.states(), 20, 3, 11)) {
    const auto d = l2_decay_experiment(md.l0, md.nu, report.gap, a / lsi.gamma, lsi.method, f, times);
    worst = std::max(worst, d.worst_gap_ratio);
  }
  const auto e = l2_decay_experiment(md.l0, md.nu, report.gap, a / lsi.gamma, lsi.method, report.eigenvector, times);
  double equality = 0.0;
  for (std::size_t k = 0; k < times.size(); ++k) equality = std::max(equality, std::abs(e.norms[k] / e.gap_bound[k] - 1.0));
  return {worst <= 1.0 + 1e-9 && equality <= 1e-6,
          "worst norm / bound " + fmt(worst) + " <= 1, eigenvector deviation " + fmt(equality) + " <= 1e-6"};
}

Outcome uniform_ergodicity() {
  const auto md = build(model_ii(8));
  const auto states = md.spec.states();
  const Vector f = tabulate_observable(md.spec.lattice, states, cosine_at_origin(1));
  const auto d = uniform_decay_experiment(md.l0, md.nu, states, md.spec.grid.mesh(), f, time_grid(5.0, 20));
  return {d.fit.r_squared >= 0.99 && d.fit.rate > 0.0,
          "rate " + fmt(d.fit.rate) + " > 0, R^2 " + fmt(d.fit.r_squared) + " >= 0.99 over t in [2.5, 5]"};
}

Outcome hypercontractivity() {
  const auto md = build(model_i(16));
  const auto report = spectral_gap(symmetrize(md.l0, md.nu).symmetric, md.nu);
  const double gamma = lsi_constant_estimate(md.spec, report, LsiMethod::HolleyStroock).gamma;
  const auto times = time_grid(3.0, 10);
  double worst = 0.0;
  int failures = 0;
  for (const auto& f : random_functions(md.spec.states(), 100, 3, 13)) {
    const auto r = hypercontractivity_check(md.spec, md.l0, md.nu, gamma, f, times);
    worst = std::max(worst, r.worst_ratio);
    failures += r.holds ? 0 : 1;
  }
  return {failures == 0, std::to_string(failures) + " of 100 fail, worst ratio " + fmt(worst) + " <= 1"};
}

Outcome monte_carlo() {
  RunConfig config;
  config.grid_points = 32;
  config.model.potential = "onsite";
  config.model.beta = 0.5;
  config.experiment.name = "sde";
  config.experiment.dt = 1e-3;
  config.experiment.horizon = 0.5;
  config.experiment.paths = 10000;
  config.experiment.start = {kTwoPi / 4};
  config.seed = 7;
  Session session(config);
  const auto report = run_experiment(session, "sde");
  std::string detail;
  for (const auto& v : report.verdicts) detail += v.name + (v.pass ? " ok" : " FAILED") + (v.detail.empty() ? "" : " (" + v.detail + ")") + "; ";
  return {report.passed(), detail};
}

Outcome truncation() {
  const auto times = time_grid(5.0, 20);
  SpecFactory interacting = [](int n) {
    return build_ibm_model({pair_cosine(1, 0, 0.5)}, Lattice(1, n, Closure::Frozen), Grid(6));
  };
  SpecFactory free = [](int n) {
    return build_ibm_model({onsite_cosine(1, 0.5)}, Lattice(1, n, Closure::Frozen), Grid(6));
  };
  const auto r = truncation_experiment(interacting, cosine_at_origin(1), times, 1, 2);
  const auto z = truncation_experiment(free, cosine_at_origin(1), times, 1, 2);
  return {r.zero_at_start && r.monotone && z.max_distance <= 1e-12,
          std::string("interacting: zero at start ") + (r.zero_at_start ? "yes" : "no") + ", monotone " +
              (r.monotone ? "yes" : "no") + ", max D " + fmt(r.max_distance) + "; non-interacting max D " +
              fmt(z.max_distance) + " <= 1e-12"};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"stationarity", stationarity},
      {"dirichlet-form order", dirichlet_order},
      {"adjoint exactness", adjoint_exactness},
      {"series recurrence", recurrence},
      {"first-order term", first_order_term},
      {"series vs direct", series_vs_direct},
      {"coefficient growth", coefficient_growth},
      {"riesz projector", riesz_projector_check},
      {"relative boundedness", relative_boundedness},
      {"l2 decay", l2_decay},
      {"uniform ergodicity", uniform_ergodicity},
      {"hypercontractivity", hypercontractivity},
      {"monte carlo", monte_carlo},
      {"truncation locality", truncation},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (!o.pass) ++failed;
    std::printf("%s %2zu %-22s %s [%.1f s]\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first.c_str(),
                o.detail.c_str(), seconds);
    std::fflush(stdout);
  }
  std::printf("%zu/%zu criteria passed\n", criteria.size() - static_cast<std::size_t>(failed), criteria.size());
  return failed == 0 ? 0 : 1;
}
