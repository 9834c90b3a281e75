#include "torusdiff/experiments.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <random>
#include <sstream>

#include "torusdiff/errors.hpp"

namespace torusdiff {

namespace fs = std::filesystem;

namespace {

constexpr std::size_t kMeasureInReportCap = 4096;
constexpr std::size_t kTripletFileCap = 200'000;
constexpr std::size_t kMeshCheckCap = 200'000;

/// Resolved config without the output location.
std::string hashed_inputs(const RunConfig& config) {
  auto j = to_json(config);
  j.erase("output");
  return j.dump();
}

StationaryMethod stationary_method(const std::string& name) {
  if (name == "dense") return StationaryMethod::DenseNullSpace;
  if (name == "gmres") return StationaryMethod::GroundedGmres;
  if (name == "sparse_lu") return StationaryMethod::GroundedSparseLU;
  return StationaryMethod::Auto;
}

Json array(const std::vector<double>& v) { return Json(v); }

Json array(const Vector& v) { return Json(std::vector<double>(v.data(), v.data() + v.size())); }

double max_of(const std::vector<double>& v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

void write_vector(const fs::path& path, const Vector& v) {
  std::ofstream out(path);
  out << std::setprecision(17);
  for (Eigen::Index i = 0; i < v.size(); ++i) out << i << ' ' << v[i] << '\n';
}

std::string fmt(double x) {
  std::ostringstream s;
  s << std::setprecision(6) << x;
  return s.str();
}

class FileSink {
 public:
  FileSink(const std::optional<fs::path>& dir, ExperimentReport& report) : dir_(dir), report_(report) {
    if (dir_) fs::create_directories(*dir_);
  }
  bool enabled() const { return dir_.has_value(); }
  template <class Fn>
  void write(const std::string& name, Fn&& fn) {
    if (!dir_) return;
    std::ofstream out(*dir_ / name);
    fn(out);
    report_.files.push_back(name);
  }
  void vector(const std::string& name, const Vector& v) {
    if (!dir_) return;
    write_vector(*dir_ / name, v);
    report_.files.push_back(name);
  }

 private:
  std::optional<fs::path> dir_;
  ExperimentReport& report_;
};

std::size_t origin_site(const Lattice& lattice) { return *lattice.origin(); }

std::vector<Vector> random_functions(Session& s, int count, std::uint64_t salt) {
  std::mt19937_64 engine(s.config().seed ^ (0x9e3779b97f4a7c15ull * (salt + 1)));
  std::vector<Vector> out;
  for (int i = 0; i < count; ++i) out.push_back(random_trigonometric(s.states(), s.config().experiment.trig_degree, engine));
  return out;
}

void stationary_experiment(Session& s, ExperimentReport& r, FileSink& files) {
  const auto& tol = s.config().tolerances;
  const auto& l = s.generator();
  const auto& nu = s.measure();
  auto& m = r.metrics;
  m["states"] = l.size();
  m["nonzeros"] = l.matrix().nonZeros();
  m["solver"] = to_string(nu.solver);
  m["residual"] = nu.residual;
  m["weight_min"] = nu.weights.minCoeff();
  m["weight_max"] = nu.weights.maxCoeff();
  m["total_variation_to_uniform"] = total_variation(nu.weights, Measure::uniform(l.size()).weights);
  m["detailed_balance_residual"] = detailed_balance_residual(l, nu);
  r.verdict("residual", nu.residual <= tol.stationary_residual,
            fmt(nu.residual) + " <= " + fmt(tol.stationary_residual));
  if (static_cast<std::size_t>(l.size()) <= kDenseStateCap && nu.solver != SolverKind::DenseNullSpace) {
    StationaryOptions dense;
    dense.method = StationaryMethod::DenseNullSpace;
    const double tv = total_variation(nu.weights, stationary_measure(l, dense).weights);
    m["dense_oracle_total_variation"] = tv;
    r.verdict("dense_agreement", tv <= tol.dense_agreement_tv, fmt(tv) + " <= " + fmt(tol.dense_agreement_tv));
  }
  if (s.spec().hamiltonian) {
    Vector plus(l.size()), minus(l.size());
    Configuration eta(s.spec().lattice, std::vector<double>(s.states().sites()));
    for (std::size_t x = 0; x < s.states().size(); ++x) {
      s.states().angles(x, eta.mutable_angles());
      const double h = s.spec().hamiltonian->value(eta);
      plus[static_cast<Eigen::Index>(x)] = h;
      minus[static_cast<Eigen::Index>(x)] = -h;
    }
    auto gibbs = [](Vector h) {
      h = (h.array() - h.maxCoeff()).exp().matrix();
      return Vector(h / h.sum());
    };
    const double tv_plus = total_variation(nu.weights, gibbs(plus));
    const double tv_minus = total_variation(nu.weights, gibbs(minus));
    m["gibbs"] = {{"total_variation_exp_plus_h", tv_plus},
                  {"total_variation_exp_minus_h", tv_minus},
                  {"orientation", tv_plus <= tv_minus ? "exp(+H)" : "exp(-H)"}};
  }
  if (static_cast<std::size_t>(l.size()) <= kMeasureInReportCap) m["measure"] = array(nu.weights);
  files.write("measure.txt", [&](std::ostream& out) { write_measure(out, nu); });
  if (static_cast<std::size_t>(l.size()) <= kTripletFileCap)
    files.write("generator.txt", [&](std::ostream& out) { write_triplets(out, l); });
}

void gap_experiment(Session& s, ExperimentReport& r, FileSink& files) {
  const auto& rep = s.spectral();
  const auto& lsi = s.lsi();
  const double a = s.ellipticity();
  auto& m = r.metrics;
  m["gap"] = rep.gap;
  m["kernel_dimension"] = rep.kernel_dimension;
  m["eigen_residual"] = max_of(rep.residuals);
  m["route"] = rep.dense ? "dense" : "lanczos";
  m["low_spectrum"] = array(rep.low_spectrum);
  m["ellipticity"] = a;
  m["lsi"] = {{"gamma", lsi.gamma},
              {"method", to_string(lsi.method)},
              {"gamma_uniform", lsi.gamma_uniform},
              {"oscillation", lsi.oscillation},
              {"decay_rate_bound", a / lsi.gamma}};

  const auto& l = s.generator();
  const auto& nu = s.measure();
  const auto samples = random_functions(s, s.config().experiment.samples, 1);
  double dirichlet = 0.0;
  for (const auto& f : samples) {
    const auto form = dirichlet_form(l, s.spec(), nu, f);
    dirichlet = std::max(dirichlet, std::abs(form.lhs - form.rhs) / std::max(std::abs(form.rhs), 1e-300));
  }
  m["dirichlet_relative_mismatch"] = dirichlet;

  const OperatorMatrix adjoint = nu_adjoint(l, nu);
  const auto others = random_functions(s, s.config().experiment.samples, 2);
  double adjoint_defect = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const Vector lf = l.apply(samples[i]);
    const double lhs = nu_inner(nu, others[i], lf);
    const double rhs = nu_inner(nu, adjoint.apply(others[i]), samples[i]);
    // Relative to the Cauchy-Schwarz scale, since (g, Lf) itself can be near 0.
    const double scale = std::max(nu_norm(nu, others[i]) * nu_norm(nu, lf), 1e-300);
    adjoint_defect = std::max(adjoint_defect, std::abs(lhs - rhs) / scale);
  }
  m["adjoint_relative_defect"] = adjoint_defect;

  r.verdict("gap_positive", rep.gap > 0.0, fmt(rep.gap));
  r.verdict("kernel_simple", rep.kernel_dimension == 1, std::to_string(rep.kernel_dimension));
  r.verdict("adjoint_identity", adjoint_defect <= 1e-12, fmt(adjoint_defect) + " <= 1e-12");
  files.write("spectral.txt", [&](std::ostream& out) { write_spectral_report(out, rep); });
}

void perturb_experiment(Session& s, ExperimentReport& r, FileSink& files) {
  const auto& tol = s.config().tolerances;
  const auto& series = s.series();
  const auto& fit = s.radius_fit();
  const auto& lsi = s.lsi();
  const double a = s.ellipticity();
  const double c0 = s.c0();
  const double critical = epsilon_c(a, c0, lsi.gamma);
  auto& m = r.metrics;
  m["order"] = series.order();
  m["series"] = {{"norms", series.norms},
                 {"residuals", series.residuals},
                 {"means", series.means},
                 {"solvability", series.solvability}};
  m["fit"] = {{"k_min", fit.k_min},
              {"k_max", fit.k_max},
              {"degenerate", fit.degenerate},
              {"growth", fit.growth},
              {"radius", std::isfinite(fit.radius) ? Json(fit.radius) : Json("inf")},
              {"prefactor", fit.prefactor},
              {"r_squared", fit.r_squared}};
  m["critical"] = {{"ellipticity", a}, {"c0", c0}, {"gamma", lsi.gamma},
                   {"method", to_string(lsi.method)}, {"epsilon_c", critical}};

  const double worst_residual = max_of(series.residuals);
  double worst_mean = 0.0;
  for (std::size_t k = 1; k < series.means.size(); ++k) worst_mean = std::max(worst_mean, std::abs(series.means[k]));
  r.verdict("recurrence_residual", worst_residual <= tol.recurrence_residual,
            fmt(worst_residual) + " <= " + fmt(tol.recurrence_residual));
  r.verdict("coefficient_mean", worst_mean <= tol.coefficient_mean,
            fmt(worst_mean) + " <= " + fmt(tol.coefficient_mean));
  r.verdict("radius_exceeds_critical", fit.degenerate || fit.radius >= critical,
            fmt(fit.radius) + " >= " + fmt(critical));

  Json sweeps = Json::array();
  const auto& nu = s.measure();
  for (double eps : s.epsilons()) {
    const auto direct = direct_perturbed_measure(s.spec(), s.perturbation(), nu, eps);
    std::vector<double> errors;
    for (int k = 0; k <= series.order(); ++k) errors.push_back(nu_norm(nu, series_density(series, nu, eps, k).g - direct.g));
    const auto full = series_density(series, nu, eps, series.order());
    sweeps.push_back({{"epsilon", eps},
                      {"errors", errors},
                      {"renormalization_defect", full.renormalization_defect},
                      {"negative", full.negative},
                      {"direct_residual", direct.measure.residual}});
    if (fit.degenerate || eps < fit.radius) {
      const bool converges = errors.back() < errors.front() || errors.front() <= 1e-14;
      r.verdict("series_approaches_direct_eps_" + fmt(eps), converges,
                fmt(errors.back()) + " < " + fmt(errors.front()));
    }
  }
  m["sweeps"] = sweeps;
  files.write("series.txt", [&](std::ostream& out) { write_series_table(out, series); });
  for (int k = 0; k <= series.order(); ++k) files.vector("f_" + std::to_string(k) + ".txt", series.coefficients[k]);
}

void projector_experiment(Session& s, ExperimentReport& r, FileSink& files) {
  const auto& tol = s.config().tolerances;
  const auto& exp = s.config().experiment;
  if (static_cast<std::size_t>(s.generator().size()) > kDenseStateCap)
    fail(ErrorKind::StateSpaceTooLarge, "the projector experiment forms dense matrices; reduce the model");
  ProjectorOptions options;
  options.initial_nodes = exp.contour_nodes;
  options.max_nodes = exp.max_contour_nodes;
  options.tolerance = tol.contour_change;
  const double radius = 0.5 * s.spectral().gap;
  const auto& nu = s.measure();
  auto& m = r.metrics;
  m["radius"] = radius;

  const auto p0 = riesz_projector(s.generator(), radius, options);
  const DenseMatrix rank_one = Vector::Ones(nu.size()) * nu.weights.transpose();
  const double p0_error = (p0.projector - rank_one).cwiseAbs().maxCoeff();
  m["unperturbed"] = {{"nodes", p0.nodes}, {"idempotency_defect", p0.idempotency_defect},
                      {"rank", p0.rank}, {"max_entry_error", p0_error}};
  r.verdict("unperturbed_projector", p0_error <= tol.unperturbed_projector,
            fmt(p0_error) + " <= " + fmt(tol.unperturbed_projector));

  Json runs = Json::array();
  for (double eps : s.epsilons()) {
    const auto l_eps = assemble_perturbed_generator(s.spec(), s.perturbation(), eps);
    const auto p = riesz_projector(l_eps, radius, options);
    const Vector g = adjoint_projector_density(p, nu);
    const auto direct = direct_perturbed_measure(s.spec(), s.perturbation(), nu, eps);
    const double density_error = (g - direct.g).cwiseAbs().maxCoeff();
    runs.push_back({{"epsilon", eps},
                    {"nodes", p.nodes},
                    {"quadrature_change", p.quadrature_change},
                    {"idempotency_defect", p.idempotency_defect},
                    {"rank", p.rank},
                    {"sigma1", p.sigma1},
                    {"sigma2", p.sigma2},
                    {"nearest_eigenvalue", p.nearest_eigenvalue},
                    {"density_error", density_error}});
    const std::string tag = "_eps_" + fmt(eps);
    r.verdict("idempotency" + tag, p.idempotency_defect <= tol.idempotency,
              fmt(p.idempotency_defect) + " <= " + fmt(tol.idempotency));
    r.verdict("rank_one" + tag, p.rank == 1, std::to_string(p.rank));
    r.verdict("density_matches_direct" + tag, density_error <= tol.projector_density,
              fmt(density_error) + " <= " + fmt(tol.projector_density));
    files.vector("density" + tag + ".txt", g);
  }
  m["perturbed"] = runs;
}

void l2decay_experiment(Session& s, ExperimentReport& r, FileSink& files) {
  const auto& tol = s.config().tolerances;
  const auto times = s.time_grid();
  const auto& nu = s.measure();
  const auto& rep = s.spectral();
  const auto& lsi = s.lsi();
  const double lsi_rate = s.ellipticity() / lsi.gamma;
  auto& m = r.metrics;
  m["gap"] = rep.gap;
  m["lsi_rate"] = lsi_rate;
  m["lsi_method"] = to_string(lsi.method);
  m["times"] = times;

  const auto eig = l2_decay_experiment(s.generator(), nu, rep.gap, lsi_rate, lsi.method, rep.eigenvector, times);
  double equality = 0.0;
  for (std::size_t k = 0; k < times.size(); ++k)
    equality = std::max(equality, std::abs(eig.norms[k] / eig.gap_bound[k] - 1.0));
  const auto& anti = s.split().antisymmetric.matrix();
  const double asymmetry = anti.nonZeros() ? anti.coeffs().cwiseAbs().maxCoeff() : 0.0;
  const double scale = s.generator().matrix().coeffs().cwiseAbs().maxCoeff();
  const bool reversible = asymmetry <= 1e-12 * scale;
  m["reversible"] = reversible;
  m["antisymmetric_max_entry"] = asymmetry;
  m["eigenvector"] = {{"norms", eig.norms}, {"max_ratio_deviation", equality}};
  // S_t acts on the gap eigenvector as e^{-gap t} only when L = S.
  if (reversible)
    r.verdict("eigenvector_equality", equality <= tol.eigenvector_equality,
              fmt(equality) + " <= " + fmt(tol.eigenvector_equality));
  files.write("decay_eigenvector.csv", [&](std::ostream& out) { write_decay_csv(out, eig); });

  bool gap_holds = true, lsi_holds = true, contraction = true;
  double worst_gap = 0.0, worst_lsi = 0.0;
  const Semigroup semigroup(s.generator());
  const auto samples = random_functions(s, s.config().experiment.samples, 3);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto rep_i = l2_decay_experiment(s.generator(), nu, rep.gap, lsi_rate, lsi.method, samples[i], times);
    gap_holds = gap_holds && rep_i.gap_bound_holds;
    lsi_holds = lsi_holds && rep_i.lsi_bound_holds;
    worst_gap = std::max(worst_gap, rep_i.worst_gap_ratio);
    worst_lsi = std::max(worst_lsi, rep_i.worst_lsi_ratio);
    const double norm0 = nu_norm(nu, samples[i]);
    const auto path = semigroup.trajectory(samples[i], times);
    for (const auto& v : path) contraction = contraction && nu_norm(nu, v) <= norm0 * (1.0 + 1e-12);
    if (i == 0) files.write("decay_random.csv", [&](std::ostream& out) { write_decay_csv(out, rep_i); });
  }
  m["random"] = {{"count", samples.size()}, {"worst_gap_ratio", worst_gap}, {"worst_lsi_ratio", worst_lsi}};
  r.verdict("gap_bound", gap_holds, "worst ratio " + fmt(worst_gap));
  r.verdict("lsi_bound_" + to_string(lsi.method), lsi_holds, "worst ratio " + fmt(worst_lsi));
  r.verdict("l2_contraction", contraction);
}

void supdecay_experiment(Session& s, ExperimentReport& r, FileSink& files) {
  const auto& tol = s.config().tolerances;
  const auto times = s.time_grid();
  const auto f = tabulate_observable(s.spec().lattice, s.states(), cosine_at_origin(s.spec().lattice.dimension()));
  const auto rep = uniform_decay_experiment(s.generator(), s.measure(), s.states(), s.spec().grid.mesh(), f, times);
  const double gap = s.spectral().gap;
  auto& m = r.metrics;
  m["observable"] = "cos(eta_0)";
  m["times"] = times;
  m["norms"] = rep.norms;
  m["fit"] = {{"rate", rep.fit.rate}, {"intercept", rep.fit.intercept}, {"r_squared", rep.fit.r_squared},
              {"points", rep.fit.points}};
  m["triple_norm"] = rep.triple_norm;
  m["fitted_constant"] = rep.fitted_constant;
  m["gap"] = gap;
  r.verdict("positive_rate", rep.fit.rate > 0.0, fmt(rep.fit.rate));
  r.verdict("fit_quality", rep.fit.r_squared >= tol.fit_r_squared,
            fmt(rep.fit.r_squared) + " >= " + fmt(tol.fit_r_squared));
  r.verdict("rate_vs_gap", rep.fit.rate >= tol.sup_rate_fraction * gap,
            fmt(rep.fit.rate) + " >= " + fmt(tol.sup_rate_fraction) + " * " + fmt(gap));
  files.write("supdecay.csv", [&](std::ostream& out) { write_decay_csv(out, rep); });
}

bool non_interacting(const RunConfig& c) {
  if (c.model.builtin == "custom") return c.model.custom.coupling == 0.0;
  return c.model.potential == "onsite" || c.model.beta == 0.0;
}

void truncate_experiment(Session& s, ExperimentReport& r, FileSink& files) {
  const auto& c = s.config();
  if (c.lattice.closure != Closure::Frozen)
    fail(ErrorKind::ConfigError, "the truncation experiment needs lattice.closure: frozen");
  const auto times = s.time_grid();
  std::vector<double> grid{0.0};
  grid.insert(grid.end(), times.begin(), times.end());
  RunConfig scaled = c;
  if (c.experiment.truncation_points != 0) scaled.grid_points = c.experiment.truncation_points;
  const SpecFactory factory = [scaled](int n) { return build_spec(scaled, n); };
  const auto f = cosine_at_origin(c.lattice.dimension);
  const int n = c.experiment.truncation_n, n_prime = c.experiment.truncation_n_prime;
  std::vector<int> scales{n};
  if (n >= 1) scales.push_back(n - 1);
  const auto reports = truncation_scan(factory, f, grid, scales, n_prime);
  const auto& rep = reports.front();
  auto& m = r.metrics;
  m["n"] = n;
  m["n_prime"] = n_prime;
  m["grid_points"] = scaled.grid_points;
  m["times"] = grid;
  m["distance"] = rep.distance;
  m["max_distance"] = rep.max_distance;
  r.verdict("zero_at_start", rep.zero_at_start, fmt(rep.distance.front()));
  r.verdict("monotone", rep.monotone);
  if (reports.size() > 1) {
    const auto& coarser = reports[1];
    m["max_distance_previous_scale"] = coarser.max_distance;
    r.verdict("shrinks_in_n", rep.max_distance <= coarser.max_distance + c.tolerances.truncation_slack,
              fmt(rep.max_distance) + " <= " + fmt(coarser.max_distance));
  }
  if (non_interacting(c))
    r.verdict("factorizes", rep.max_distance <= c.tolerances.truncation_slack,
              fmt(rep.max_distance) + " <= " + fmt(c.tolerances.truncation_slack));
  files.write("truncation.csv", [&](std::ostream& out) {
    out << "# time,distance\n" << std::setprecision(17);
    for (std::size_t k = 0; k < grid.size(); ++k) out << grid[k] << ',' << rep.distance[k] << '\n';
  });
}

void hyper_experiment(Session& s, ExperimentReport& r, FileSink& files) {
  const auto times = s.time_grid();
  const auto& lsi = s.lsi();
  auto& m = r.metrics;
  m["gamma"] = lsi.gamma;
  m["method"] = to_string(lsi.method);
  m["times"] = times;
  std::vector<double> exponents;
  for (double t : times) exponents.push_back(gross_exponent(t, lsi.gamma));
  m["exponents"] = exponents;
  auto samples = random_functions(s, s.config().experiment.samples, 4);
  const Vector one = Vector::Ones(s.generator().size());
  const auto constant = hypercontractivity_check(s.spec(), s.generator(), s.measure(), lsi.gamma, one, times);
  double worst = 0.0;
  bool holds = true;
  for (const auto& f : samples) {
    const auto rep = hypercontractivity_check(s.spec(), s.generator(), s.measure(), lsi.gamma, f, times);
    worst = std::max(worst, rep.worst_ratio);
    holds = holds && rep.holds;
  }
  double constant_deviation = 0.0;
  for (double v : constant.lhs) constant_deviation = std::max(constant_deviation, std::abs(v - 1.0));
  m["random"] = {{"count", samples.size()}, {"worst_ratio", worst}};
  m["constant_deviation"] = constant_deviation;
  r.verdict("holds_random", holds, "worst ratio " + fmt(worst));
  r.verdict("constant_equality", constant_deviation <= 1e-10, fmt(constant_deviation));
  (void)files;
}

void sde_experiment(Session& s, ExperimentReport& r, FileSink& files) {
  const auto& c = s.config();
  const auto& exp = c.experiment;
  const auto& lattice = s.spec().lattice;
  const int points = s.spec().grid.points();
  std::vector<int> digits(lattice.site_count(), 0);
  if (!exp.start.empty()) {
    if (exp.start.size() != lattice.site_count())
      fail(ErrorKind::ConfigError, "experiment.start needs one angle per box site");
    for (std::size_t i = 0; i < digits.size(); ++i) {
      const long k = std::lround(exp.start[i] / s.spec().grid.mesh());
      digits[i] = static_cast<int>(((k % points) + points) % points);
    }
  }
  std::vector<double> start(digits.size());
  for (std::size_t i = 0; i < digits.size(); ++i) start[i] = s.spec().grid.angle(digits[i]);
  const std::size_t origin = origin_site(lattice);
  auto observable = [origin](std::span<const double> x) { return std::cos(x[origin]); };

  const auto ensemble = euler_maruyama(s.spec(), start, exp.dt, exp.horizon, exp.paths, c.seed);
  const auto mc = monte_carlo_expectation(ensemble, observable);
  const auto bias = coupled_step_difference(s.spec(), start, exp.dt, exp.horizon, exp.paths, c.seed, observable);
  const auto rerun = euler_maruyama(s.spec(), start, exp.dt, exp.horizon, exp.paths, c.seed, 0, Execution::Serial);

  const Vector f = tabulate(s.states(), [origin](std::span<const double> x) { return std::cos(x[origin]); });
  const std::size_t index = s.states().encode(digits);
  const double exact = semigroup_apply(s.generator(), f, exp.horizon)[static_cast<Eigen::Index>(index)];

  auto& m = r.metrics;
  m["start"] = start;
  m["observable"] = "cos(eta_0)";
  m["mc"] = {{"mean", mc.mean}, {"standard_error", mc.standard_error}, {"paths", mc.samples}};
  m["dt_bias"] = {{"mean", bias.mean}, {"standard_error", bias.standard_error}};
  m["exact"] = exact;
  double mesh_bias = 0.0;
  bool mesh_checked = false;
  const std::size_t fine_states =
      static_cast<std::size_t>(std::pow(2.0 * points, static_cast<double>(lattice.site_count())));
  if (fine_states <= kMeshCheckCap) {
    RunConfig fine_config = c;
    fine_config.grid_points = 2 * points;
    const DiffusionSpec fine = build_spec(fine_config);
    const StateSpace fine_space = fine.states();
    std::vector<int> fine_digits(digits);
    for (int& d : fine_digits) d *= 2;
    const Vector ff = tabulate(fine_space, [origin](std::span<const double> x) { return std::cos(x[origin]); });
    const double exact_fine =
        semigroup_apply(assemble_generator(fine), ff, exp.horizon)[static_cast<Eigen::Index>(fine_space.encode(fine_digits))];
    mesh_bias = 4.0 / 3.0 * std::abs(exact - exact_fine);
    mesh_checked = true;
    m["exact_half_mesh"] = exact_fine;
  }
  m["mesh_bias"] = mesh_bias;
  m["mesh_bias_estimated"] = mesh_checked;
  const double bar = mc.standard_error + std::abs(bias.mean) + bias.standard_error + mesh_bias;
  const double gap = std::abs(mc.mean - exact);
  m["combined_error_bar"] = bar;
  m["difference"] = gap;
  r.verdict("monte_carlo_agreement", gap <= c.tolerances.monte_carlo_sigmas * bar,
            fmt(gap) + " <= " + fmt(c.tolerances.monte_carlo_sigmas) + " * " + fmt(bar));
  r.verdict("reproducible", rerun.angles == ensemble.angles);
  files.write("ensemble_final.csv", [&](std::ostream& out) { write_ensemble_csv(out, ensemble); });
}

}  // namespace

Session::Session(RunConfig config)
    : config_(std::move(config)), spec_(build_spec(config_)), states_(spec_.states()) {}

const OperatorMatrix& Session::generator() {
  if (!generator_) generator_ = assemble_generator(spec_);
  return *generator_;
}

const Measure& Session::measure() {
  if (!measure_) {
    StationaryOptions options;
    options.method = stationary_method(config_.experiment.stationary_method);
    options.tolerance = config_.tolerances.stationary_residual;
    measure_ = stationary_measure(generator(), options);
  }
  return *measure_;
}

const SymmetricSplit& Session::split() {
  if (!split_) split_ = symmetrize(generator(), measure());
  return *split_;
}

const SpectralReport& Session::spectral() {
  if (!spectral_) {
    SpectralOptions options;
    options.seed = config_.seed;
    spectral_ = spectral_gap(split().symmetric, measure(), options);
  }
  return *spectral_;
}

const LsiEstimate& Session::lsi() {
  if (!lsi_)
    lsi_ = lsi_constant_estimate(spec_, spectral(),
                                 spec_.hamiltonian ? LsiMethod::HolleyStroock : LsiMethod::GapLowerProxy);
  return *lsi_;
}

double Session::ellipticity() {
  if (!ellipticity_) ellipticity_ = second_order_floor(spec_.coefficients, spec_.lattice, spec_.grid);
  return *ellipticity_;
}

const PerturbationField& Session::perturbation() const {
  if (!spec_.perturbation) fail(ErrorKind::ConfigError, "this experiment needs a perturbation section with a kind");
  return *spec_.perturbation;
}

const OperatorMatrix& Session::perturbation_operator() {
  if (!perturbation_operator_)
    perturbation_operator_ = assemble_first_order(perturbation(), spec_.lattice, spec_.grid, spec_.state_cap);
  return *perturbation_operator_;
}

const SeriesResult& Session::series() {
  if (!series_) series_ = rs_coefficients(generator(), perturbation_operator(), measure(), config_.experiment.order);
  return *series_;
}

const RadiusFit& Session::radius_fit() {
  if (!radius_fit_) radius_fit_ = empirical_radius(series(), std::min(2, series().order()));
  return *radius_fit_;
}

double Session::c0() {
  if (!c0_) c0_ = compute_C0(perturbation(), spec_.lattice, spec_.grid, spec_.state_cap);
  return *c0_;
}

std::vector<double> Session::epsilons() {
  if (!config_.experiment.epsilon.empty()) return config_.experiment.epsilon;
  const auto& fit = radius_fit();
  if (fit.degenerate || !std::isfinite(fit.radius)) return {config_.experiment.epsilon_fraction};
  return {config_.experiment.epsilon_fraction * fit.radius};
}

std::vector<double> Session::time_grid() const {
  std::vector<double> out;
  const int count = config_.experiment.time_points;
  for (int k = 1; k <= count; ++k) out.push_back(config_.experiment.tmax * k / count);
  return out;
}

std::vector<std::string> applicable_experiments(const Session& session) {
  std::vector<std::string> out{"stationary", "gap"};
  const bool perturbed = session.spec().perturbation.has_value();
  if (perturbed) out.push_back("perturb");
  if (perturbed && session.states().size() <= kDenseStateCap) out.push_back("projector");
  out.push_back("l2decay");
  out.push_back("supdecay");
  if (session.config().lattice.closure == Closure::Frozen) out.push_back("truncate");
  if (session.spec().hamiltonian) out.push_back("hyper");
  out.push_back("sde");
  return out;
}

ExperimentReport run_experiment(Session& session, const std::string& name,
                                const std::optional<fs::path>& directory) {
  ExperimentReport report;
  report.experiment = name;
  report.inputs_hash = fnv1a_hex(hashed_inputs(session.config()) + "|" + name);
  FileSink files(directory, report);
  const auto begin = std::chrono::steady_clock::now();
  if (name == "stationary") stationary_experiment(session, report, files);
  else if (name == "gap") gap_experiment(session, report, files);
  else if (name == "perturb") perturb_experiment(session, report, files);
  else if (name == "projector") projector_experiment(session, report, files);
  else if (name == "l2decay") l2decay_experiment(session, report, files);
  else if (name == "supdecay") supdecay_experiment(session, report, files);
  else if (name == "truncate") truncate_experiment(session, report, files);
  else if (name == "hyper") hyper_experiment(session, report, files);
  else if (name == "sde") sde_experiment(session, report, files);
  else fail(ErrorKind::ConfigError, "unknown experiment '" + name + "'");
  report.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - begin).count();
  if (directory) {
    std::ofstream(*directory / "report.json") << report.to_json().dump(2) << '\n';
    std::ofstream csv(*directory / "report.csv");
    write_report_csv(csv, report);
  }
  return report;
}

bool RunOutcome::passed() const {
  return std::all_of(reports.begin(), reports.end(), [](const auto& r) { return r.passed(); });
}

RunOutcome run(const RunConfig& config, bool write_files) {
  validate(config);
  Session session(config);
  RunOutcome outcome;
  std::vector<std::string> names;
  if (config.experiment.name == "all") {
    names = applicable_experiments(session);
    for (const auto& n : experiment_names())
      if (n != "all" && std::find(names.begin(), names.end(), n) == names.end()) outcome.skipped.push_back(n);
  } else {
    names = {config.experiment.name};
  }
  const fs::path root(config.output);
  if (write_files) fs::create_directories(root);
  Json experiments = Json::array();
  for (const auto& name : names) {
    auto report = run_experiment(session, name, write_files ? std::optional<fs::path>(root / name) : std::nullopt);
    experiments.push_back({{"name", name}, {"passed", report.passed()}, {"inputs_hash", report.inputs_hash}});
    outcome.reports.push_back(std::move(report));
  }
  Json& manifest = outcome.manifest;
  manifest["tool"] = "torusdiff";
  manifest["config_source"] = config.source;
  manifest["config"] = to_json(config);
  manifest["config_hash"] = fnv1a_hex(hashed_inputs(config));
  manifest["seed"] = config.seed;
  manifest["internal"] = {{"dense_state_cap", kDenseStateCap},
                          {"semigroup_dense_cap", SemigroupOptions{}.dense_cap},
                          {"krylov_tolerance", SemigroupOptions{}.tolerance},
                          {"projector_max_nodes", config.experiment.max_contour_nodes},
                          {"adjoint_defect_threshold", 1e-12},
                          {"hypercontractivity_constant_threshold", 1e-10},
                          {"mesh_check_state_cap", kMeshCheckCap}};
  manifest["experiments"] = experiments;
  manifest["skipped"] = outcome.skipped;
  manifest["passed"] = outcome.passed();
  if (write_files) std::ofstream(root / "manifest.json") << manifest.dump(2) << '\n';
  return outcome;
}

}  // namespace torusdiff
