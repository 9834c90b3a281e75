#include "torusdiff/stationary.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <ostream>
#include <random>
#include <sstream>

#include <Eigen/Eigenvalues>
#include <Eigen/LU>

#include "torusdiff/errors.hpp"
#include "torusdiff/linalg.hpp"

namespace torusdiff {

std::string to_string(LsiMethod method) {
  return method == LsiMethod::HolleyStroock ? "HolleyStroock" : "GapLowerProxy";
}

namespace {

// Sign fix, clamping of roundoff-level negatives and normalization.
Vector normalize_weights(Vector w) {
  if (w.sum() < 0.0) w = -w;
  const double total = w.sum();
  if (!(total > 0.0)) fail(ErrorKind::DegenerateMeasure, "null vector has zero mass");
  w /= total;
  for (Eigen::Index k = 0; k < w.size(); ++k) {
    if (w[k] < -1e-14) {
      std::ostringstream msg;
      msg << "stationary weight " << w[k] << " at state " << k << " is genuinely negative";
      fail(ErrorKind::DegenerateMeasure, msg.str());
    }
    if (w[k] < 0.0) w[k] = 0.0;
  }
  return w / w.sum();
}

Measure dense_null_space(const OperatorMatrix& l) {
  const DenseMatrix transposed = l.dense().transpose();
  Eigen::FullPivLU<DenseMatrix> lu(transposed);
  lu.setThreshold(1e-11);
  const auto kernel_dim = lu.dimensionOfKernel();
  if (kernel_dim != 1) {
    std::ostringstream msg;
    msg << "left kernel of L has dimension " << kernel_dim;
    fail(ErrorKind::NonUniqueKernel, msg.str());
  }
  Measure nu;
  nu.weights = normalize_weights(lu.kernel().col(0));
  nu.solver = SolverKind::DenseNullSpace;
  return nu;
}

Eigen::Index ground_state(const SparseMatrix& m) {
  Eigen::Index best = 0;
  double magnitude = -1.0;
  for (Eigen::Index r = 0; r < m.outerSize(); ++r) {
    const double d = std::abs(m.coeff(r, r));
    if (d > magnitude) {
      magnitude = d;
      best = r;
    }
  }
  return best;
}

Vector reduce(const Vector& v, Eigen::Index g) {
  Vector out(v.size() - 1);
  out.head(g) = v.head(g);
  out.tail(v.size() - 1 - g) = v.tail(v.size() - 1 - g);
  return out;
}

Vector expand(const Vector& v, Eigen::Index g, double value) {
  Vector out(v.size() + 1);
  out.head(g) = v.head(g);
  out[g] = value;
  out.tail(v.size() - g) = v.tail(v.size() - g);
  return out;
}

Measure grounded(const OperatorMatrix& l, const StationaryOptions& options, bool use_gmres) {
  const ColMajorSparse transposed = l.matrix().transpose();
  const Eigen::Index g = ground_state(l.matrix());
  const Vector rhs = -reduce(Vector(transposed.col(g)), g);
  Vector y;
  if (use_gmres) {
    const ColMajorSparse reduced = remove_row_and_column(transposed, g);
    auto result = gmres_ilut(reduced, rhs, 1e-15, options.max_iterations);
    y = result.x;
    // Iterative refinement on the reduced system.
    for (int pass = 0; pass < 4; ++pass) {
      const Vector r = rhs - reduced * y;
      if (r.norm() <= 1e-15 * rhs.norm()) break;
      auto correction = gmres_ilut(reduced, r, 1e-12, options.max_iterations);
      y += correction.x;
      result.converged = result.converged || correction.converged;
    }
    const double rel = (rhs - reduced * y).norm() / rhs.norm();
    if (!result.converged && rel > 1e-12) {
      std::ostringstream msg;
      msg << "GMRES stopped after " << result.iterations << " iterations, estimated error "
          << result.error << ", reduced residual " << rel;
      fail(ErrorKind::NoConvergence, msg.str());
    }
  } else {
    GroundedSolver solver(transposed, g);
    y = reduce(solver.solve(Vector(-transposed.col(g))), g);
  }
  Measure nu;
  nu.weights = normalize_weights(expand(y, g, 1.0));
  nu.solver = use_gmres ? SolverKind::GroundedGmres : SolverKind::GroundedSparseLU;
  return nu;
}

}  // namespace

double stationarity_residual(const OperatorMatrix& l, const Vector& nu) {
  const Vector r = l.matrix().transpose() * nu;
  return r.lpNorm<1>() / l.l1_norm();
}

double total_variation(const Vector& p, const Vector& q) { return 0.5 * (p - q).lpNorm<1>(); }

Measure stationary_measure(const OperatorMatrix& l, const StationaryOptions& options) {
  auto method = options.method;
  if (method == StationaryMethod::Auto)
    method = static_cast<std::size_t>(l.size()) <= options.dense_cap
                 ? StationaryMethod::DenseNullSpace
                 : StationaryMethod::GroundedGmres;
  Measure nu;
  switch (method) {
    case StationaryMethod::DenseNullSpace: nu = dense_null_space(l); break;
    case StationaryMethod::GroundedGmres: nu = grounded(l, options, true); break;
    default: nu = grounded(l, options, false); break;
  }
  nu.residual = stationarity_residual(l, nu.weights);
  if (nu.residual > options.tolerance) {
    std::ostringstream msg;
    msg << "stationarity residual " << nu.residual << " above " << options.tolerance << " ("
        << to_string(nu.solver) << ")";
    fail(ErrorKind::NoConvergence, msg.str());
  }
  return nu;
}

double detailed_balance_residual(const OperatorMatrix& l, const Measure& nu) {
  const auto& m = l.matrix();
  const auto& w = nu.weights;
  double worst = 0.0, scale = 0.0;
  for (Eigen::Index r = 0; r < m.outerSize(); ++r)
    for (SparseMatrix::InnerIterator it(m, r); it; ++it) {
      const double flux = w[r] * it.value();
      scale = std::max(scale, std::abs(flux));
      if (it.col() == r) continue;
      const double back = w[it.col()] * m.coeff(it.col(), r);
      worst = std::max(worst, std::abs(flux - back));
    }
  return scale > 0.0 ? worst / scale : 0.0;
}

namespace {

SparseMatrix similarity_transform(const OperatorMatrix& s, const Vector& root) {
  SparseMatrix out = s.matrix();
  for (Eigen::Index r = 0; r < out.outerSize(); ++r)
    for (SparseMatrix::InnerIterator it(out, r); it; ++it)
      it.valueRef() *= root[r] / root[it.col()];
  return out;
}

SpectralReport dense_gap(const OperatorMatrix& s, const Measure& nu) {
  const Vector root = nu.weights.array().sqrt();
  DenseMatrix sym = -DenseMatrix(similarity_transform(s, root));
  sym = 0.5 * (sym + sym.transpose()).eval();
  Eigen::SelfAdjointEigenSolver<DenseMatrix> solver(sym);
  if (solver.info() != Eigen::Success) fail(ErrorKind::NoConvergence, "dense eigensolver failed");
  const Vector& values = solver.eigenvalues();
  const double scale = values.cwiseAbs().maxCoeff();
  SpectralReport report;
  report.dense = true;
  while (report.kernel_dimension < values.size() &&
         std::abs(values[report.kernel_dimension]) <= 1e-9 * scale)
    ++report.kernel_dimension;
  if (report.kernel_dimension >= values.size())
    fail(ErrorKind::NoConvergence, "no nonzero eigenvalue found");
  const Eigen::Index k = report.kernel_dimension;
  report.gap = values[k];
  const Vector v = solver.eigenvectors().col(k);
  report.residuals.push_back((sym * v - report.gap * v).norm());
  for (Eigen::Index j = 0; j < std::min<Eigen::Index>(values.size(), 12); ++j)
    report.low_spectrum.push_back(values[j]);
  Vector phi = v.array() / root.array();
  phi = centered(nu, phi);
  report.eigenvector = phi / nu_norm(nu, phi);
  return report;
}

SpectralReport lanczos_gap(const OperatorMatrix& s, const Measure& nu, const SpectralOptions& options) {
  const Vector root = nu.weights.array().sqrt();
  const ColMajorSparse k = -ColMajorSparse(similarity_transform(s, root));
  const Vector q = root / root.norm();
  BorderedSolver inverse(k, q, q);
  const Eigen::Index n = k.rows();
  const int steps = static_cast<int>(std::min<Eigen::Index>(options.lanczos_steps, n - 1));

  std::mt19937_64 engine(options.seed);
  std::normal_distribution<double> normal;
  Vector v(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = normal(engine);
  v -= q.dot(v) * q;
  v.normalize();

  DenseMatrix basis(n, steps + 1);
  basis.col(0) = v;
  Vector alpha(steps), beta(steps);
  double theta = 0.0;
  Vector ritz;
  int used = 0;
  for (int j = 0; j < steps; ++j) {
    Vector w = inverse.solve(basis.col(j));
    alpha[j] = basis.col(j).dot(w);
    // Full reorthogonalization, twice.
    for (int pass = 0; pass < 2; ++pass) {
      w -= q.dot(w) * q;
      w -= basis.leftCols(j + 1) * (basis.leftCols(j + 1).transpose() * w);
    }
    beta[j] = w.norm();
    used = j + 1;
    DenseMatrix t = DenseMatrix::Zero(used, used);
    for (int i = 0; i < used; ++i) {
      t(i, i) = alpha[i];
      if (i + 1 < used) t(i, i + 1) = t(i + 1, i) = beta[i];
    }
    Eigen::SelfAdjointEigenSolver<DenseMatrix> small(t);
    theta = small.eigenvalues()[used - 1];
    ritz = small.eigenvectors().col(used - 1);
    const double estimate = std::abs(beta[j] * ritz[used - 1]);
    if (estimate <= 1e-13 * std::abs(theta) || beta[j] <= 1e-300) break;
    basis.col(j + 1) = w / beta[j];
  }
  SpectralReport report;
  report.dense = false;
  report.kernel_dimension = 1;
  report.gap = 1.0 / theta;
  Vector y = basis.leftCols(used) * ritz;
  y.normalize();
  const double residual = (k * y - report.gap * y).norm();
  report.residuals.push_back(residual);
  if (residual > options.residual_tolerance * std::max(1.0, report.gap)) {
    std::ostringstream msg;
    msg << "Lanczos residual " << residual << " after " << used << " steps";
    fail(ErrorKind::NoConvergence, msg.str());
  }
  Vector phi = y.array() / root.array();
  phi = centered(nu, phi);
  report.eigenvector = phi / nu_norm(nu, phi);
  report.low_spectrum = {0.0, report.gap};
  return report;
}

}  // namespace

SpectralReport spectral_gap(const OperatorMatrix& s, const Measure& nu, const SpectralOptions& options) {
  SpectralReport report =
      (!options.force_iterative && static_cast<std::size_t>(s.size()) <= options.dense_cap)
          ? dense_gap(s, nu)
          : lanczos_gap(s, nu, options);
  for (double r : report.residuals)
    if (r > options.residual_tolerance * std::max(1.0, report.gap)) {
      std::ostringstream msg;
      msg << "eigen-residual " << r << " above tolerance";
      fail(ErrorKind::NoConvergence, msg.str());
    }
  report.lsi_gamma = 1.0 / report.gap;
  report.lsi_method = LsiMethod::GapLowerProxy;
  return report;
}

namespace {

struct LsiFunctional {
  int points;
  double mesh;

  // Returns J(f) = (1/2) Ent(f^2) / E(f) and fills its gradient.
  double operator()(const Vector& f, Vector* gradient) const {
    const double m = static_cast<double>(points);
    const double second_moment = f.squaredNorm() / m;
    double ent = 0.0;
    for (int k = 0; k < points; ++k)
      if (f[k] > 0.0) ent += f[k] * f[k] * std::log(f[k] * f[k]);
    ent = ent / m - second_moment * std::log(second_moment);
    double energy = 0.0;
    for (int k = 0; k < points; ++k) {
      const double d = f[(k + 1) % points] - f[k];
      energy += d * d;
    }
    energy /= m * mesh * mesh;
    if (energy <= 0.0) return 0.0;
    const double value = 0.5 * ent / energy;
    if (gradient) {
      gradient->resize(points);
      for (int k = 0; k < points; ++k) {
        const double fk = f[k];
        const double d_ent =
            fk > 0.0 ? (2.0 / m) * fk * (std::log(fk * fk) - std::log(second_moment)) : 0.0;
        const double d_energy = (2.0 / (m * mesh * mesh)) *
                                (2.0 * fk - f[(k + 1) % points] - f[(k + points - 1) % points]);
        (*gradient)[k] = (0.5 * d_ent * energy - 0.5 * ent * d_energy) / (energy * energy);
      }
    }
    return value;
  }
};

double ascend(const LsiFunctional& functional, Vector f) {
  auto normalize = [&](Vector& x) {
    x = x.cwiseAbs();
    x *= std::sqrt(static_cast<double>(x.size())) / x.norm();
  };
  normalize(f);
  Vector grad;
  double value = functional(f, &grad);
  double step = 1.0;
  for (int iter = 0; iter < 600 && step > 1e-14; ++iter) {
    Vector trial = f + step * grad;
    normalize(trial);
    Vector trial_grad;
    const double trial_value = functional(trial, &trial_grad);
    if (trial_value > value) {
      f = trial;
      grad = trial_grad;
      value = trial_value;
      step *= 1.5;
    } else {
      step *= 0.5;
    }
  }
  return value;
}

}  // namespace

double uniform_lsi_constant(int points) {
  const Grid grid(points);
  const double h = grid.mesh();
  // Small-perturbation limit: the inverse spectral gap of the grid Laplacian.
  const double linearized = h * h / (2.0 * (1.0 - std::cos(h)));
  LsiFunctional functional{points, h};
  double best = linearized;
  std::mt19937_64 engine(20240601);
  std::normal_distribution<double> normal;
  for (double amplitude : {0.05, 0.2, 0.5, 1.0, 2.0}) {
    for (int start = 0; start < 8; ++start) {
      Vector f(points);
      for (int k = 0; k < points; ++k) f[k] = 1.0 + amplitude * normal(engine);
      best = std::max(best, ascend(functional, f));
    }
  }
  for (double kappa : {0.25, 0.5, 1.0, 2.0, 4.0, 8.0}) {
    Vector f(points);
    for (int k = 0; k < points; ++k) f[k] = std::exp(kappa * std::cos(grid.angle(k)));
    best = std::max(best, ascend(functional, f));
  }
  return best;
}

double hamiltonian_oscillation(const DiffusionSpec& spec) {
  if (!spec.hamiltonian) fail(ErrorKind::NoHamiltonian, "spec carries no Hamiltonian");
  const auto states = spec.states();
  Configuration eta(spec.lattice, std::vector<double>(states.sites()));
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (std::size_t k = 0; k < states.size(); ++k) {
    states.angles(k, eta.mutable_angles());
    const double value = spec.hamiltonian->value(eta);
    lo = std::min(lo, value);
    hi = std::max(hi, value);
  }
  return hi - lo;
}

LsiEstimate lsi_constant_estimate(const DiffusionSpec& spec, const SpectralReport& report,
                                  LsiMethod method) {
  LsiEstimate out;
  out.method = method;
  if (method == LsiMethod::GapLowerProxy) {
    out.gamma = 1.0 / report.gap;
    return out;
  }
  out.oscillation = hamiltonian_oscillation(spec);
  out.gamma_uniform = uniform_lsi_constant(spec.grid.points());
  out.gamma = out.gamma_uniform * std::exp(out.oscillation);
  return out;
}

void write_measure(std::ostream& out, const Measure& nu) {
  out << std::setprecision(17);
  for (Eigen::Index k = 0; k < nu.weights.size(); ++k) out << k << ' ' << nu.weights[k] << '\n';
}

void write_spectral_report(std::ostream& out, const SpectralReport& report) {
  out << std::setprecision(17);
  out << "gap=" << report.gap << '\n';
  out << "kernel_dimension=" << report.kernel_dimension << '\n';
  out << "eigen_residual=" << (report.residuals.empty() ? 0.0 : report.residuals.front()) << '\n';
  out << "lsi_gamma=" << report.lsi_gamma << '\n';
  out << "lsi_method=" << to_string(report.lsi_method) << '\n';
  out << "solver=" << (report.dense ? "dense" : "lanczos-shift-invert") << '\n';
}

}  // namespace torusdiff
