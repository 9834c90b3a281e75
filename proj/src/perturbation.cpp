#include "torusdiff/perturbation.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <iomanip>
#include <ostream>
#include <sstream>

#include <Eigen/Eigenvalues>
#include <Eigen/LU>
#include <Eigen/SVD>

#include "torusdiff/errors.hpp"
#include "torusdiff/linalg.hpp"

namespace torusdiff {

double epsilon_c(double a, double c0, double gamma) {
  if (!(a > 0.0) || !(c0 > 0.0) || !(gamma > 0.0)) {
    std::ostringstream msg;
    msg << "epsilon_c needs positive constants, got a=" << a << " C0=" << c0 << " gamma=" << gamma;
    fail(ErrorKind::NonPositiveConstant, msg.str());
  }
  return a / (c0 * std::sqrt(gamma));
}

namespace {

// Solves L0* f = r with <f>_nu = 0 by either deflation strategy.
class MeanZeroSolver {
 public:
  MeanZeroSolver(const OperatorMatrix& adjoint, const Measure& nu, DeflationStrategy strategy)
      : nu_(nu), strategy_(strategy) {
    const ColMajorSparse k = adjoint.matrix();
    if (strategy == DeflationStrategy::Bordered) {
      bordered_.emplace(k, Vector::Ones(k.rows()), nu.weights);
    } else {
      Eigen::Index heaviest = 0;
      nu.weights.maxCoeff(&heaviest);
      grounded_.emplace(k, heaviest);
    }
  }

  Vector solve(const Vector& r) const {
    Vector f = strategy_ == DeflationStrategy::Bordered ? bordered_->solve(r) : grounded_->solve(r);
    return centered(nu_, f);
  }

 private:
  const Measure& nu_;
  DeflationStrategy strategy_;
  std::optional<BorderedSolver> bordered_;
  std::optional<GroundedSolver> grounded_;
};

}  // namespace

SeriesResult rs_coefficients(const OperatorMatrix& l0, const OperatorMatrix& a, const Measure& nu,
                             int order, DeflationStrategy strategy) {
  if (order < 0) fail(ErrorKind::InvalidArgument, "series order must be nonnegative");
  const double stationarity = stationarity_residual(l0, nu.weights);
  if (stationarity > 1e-9) {
    std::ostringstream msg;
    msg << "nu is not stationary for L0 (residual " << stationarity << ")";
    fail(ErrorKind::InvalidArgument, msg.str());
  }
  const auto l0_adjoint = nu_adjoint(l0, nu);
  const auto a_adjoint = nu_adjoint(a, nu);
  const MeanZeroSolver solver(l0_adjoint, nu, strategy);

  SeriesResult out;
  const Eigen::Index n = nu.size();
  out.coefficients.push_back(Vector::Ones(n));
  out.norms.push_back(nu_norm(nu, out.coefficients.back()));
  out.means.push_back(1.0);
  for (int k = 0; k < order; ++k) {
    const Vector source = a_adjoint.apply(out.coefficients[k]);
    const double source_norm = nu_norm(nu, source);
    const double solvability = nu_mean(nu, source);
    out.solvability.push_back(solvability);
    if (std::abs(solvability) > 1e-10 * std::max(1.0, source_norm)) {
      std::ostringstream msg;
      msg << "<A* f_" << k << ">_nu = " << solvability << " (|A* f_k| = " << source_norm << ")";
      fail(ErrorKind::SolvabilityViolated, msg.str());
    }
    const Vector rhs = -source;
    Vector f = solver.solve(rhs);
    auto residual_of = [&](const Vector& x) {
      const double r = nu_norm(nu, l0_adjoint.apply(x) - rhs);
      return source_norm > 0.0 ? r / source_norm : r;
    };
    double residual = residual_of(f);
    for (int pass = 0; pass < 3 && residual > 1e-12; ++pass) {
      f += solver.solve(rhs - l0_adjoint.apply(f));
      residual = residual_of(f);
    }
    if (residual > 1e-9) {
      std::ostringstream msg;
      msg << "recurrence residual " << residual << " at k=" << k + 1;
      fail(ErrorKind::NoConvergence, msg.str());
    }
    out.residuals.push_back(residual);
    out.means.push_back(nu_mean(nu, f));
    out.norms.push_back(nu_norm(nu, f));
    out.coefficients.push_back(std::move(f));
  }
  return out;
}

RadiusFit empirical_radius(const SeriesResult& series, int k_min) {
  RadiusFit fit;
  fit.k_min = k_min;
  fit.k_max = series.order();
  bool all_small = true;
  for (std::size_t k = 1; k < series.norms.size(); ++k) all_small = all_small && series.norms[k] < 1e-14;
  if (all_small) {
    fit.degenerate = true;
    return fit;
  }
  if (fit.k_max - k_min < 1) fail(ErrorKind::InvalidArgument, "need at least two orders to fit");
  std::vector<double> xs, ys;
  for (int k = k_min; k <= fit.k_max; ++k) {
    xs.push_back(k);
    ys.push_back(std::log(std::max(series.norms[k], 1e-300)));
  }
  const double m = static_cast<double>(xs.size());
  double sx = 0, sy = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sx += xs[i];
    sy += ys[i];
  }
  const double mx = sx / m, my = sy / m;
  double sxx = 0, sxy = 0, syy = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxx += (xs[i] - mx) * (xs[i] - mx);
    sxy += (xs[i] - mx) * (ys[i] - my);
    syy += (ys[i] - my) * (ys[i] - my);
  }
  const double slope = sxy / sxx;
  const double intercept = my - slope * mx;
  double ss_res = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double e = ys[i] - (intercept + slope * xs[i]);
    ss_res += e * e;
  }
  fit.growth = std::exp(slope);
  fit.radius = 1.0 / fit.growth;
  fit.prefactor = std::exp(intercept);
  fit.r_squared = syy > 0.0 ? 1.0 - ss_res / syy : 1.0;
  return fit;
}

SeriesDensity series_density(const SeriesResult& series, const Measure& nu, double eps, int order) {
  if (order > series.order()) fail(ErrorKind::InvalidArgument, "order exceeds computed series");
  SeriesDensity out;
  out.g = Vector::Zero(nu.size());
  double power = 1.0;
  for (int k = 0; k <= order; ++k) {
    out.g += power * series.coefficients[k];
    power *= eps;
  }
  out.renormalization_defect = std::abs(nu_mean(nu, out.g) - 1.0);
  out.negative = out.g.minCoeff() < 0.0;
  const Vector weights = nu.weights.cwiseProduct(out.g);
  out.measure.weights = weights / weights.sum();
  out.measure.solver = SolverKind::Exact;
  return out;
}

DirectPerturbation direct_perturbed_measure(const DiffusionSpec& spec, const PerturbationField& c,
                                            const Measure& nu, double eps,
                                            const StationaryOptions& options) {
  const auto l_eps = assemble_perturbed_generator(spec, c, eps);
  DirectPerturbation out;
  out.measure = stationary_measure(l_eps, options);
  out.g = out.measure.weights.cwiseQuotient(nu.weights);
  return out;
}

namespace {

using ComplexMatrix = Eigen::MatrixXcd;

// (1/Q) sum over the nodes q = offset, offset + stride, ... of z_q (z_q - L)^{-1}
// with z_q = r exp(2 pi i q / Q).
DenseMatrix quadrature_sum(const DenseMatrix& l, double radius, int nodes, int offset, int stride) {
  const Eigen::Index n = l.rows();
  ComplexMatrix total = ComplexMatrix::Zero(n, n);
  const ComplexMatrix identity = ComplexMatrix::Identity(n, n);
  for (int q = offset; q < nodes; q += stride) {
    // L is real, so node nodes - q contributes the conjugate of node q.
    if (2 * q > nodes) continue;
    const double weight = (q == 0 || 2 * q == nodes) ? 1.0 : 2.0;
    const std::complex<double> z = std::polar(radius, kTwoPi * q / nodes);
    ComplexMatrix shifted = -l.cast<std::complex<double>>();
    shifted.diagonal().array() += z;
    Eigen::PartialPivLU<ComplexMatrix> lu(shifted);
    if (!(lu.rcond() > 1e-14)) {
      std::ostringstream msg;
      msg << "resolvent at z=" << z << " is numerically singular (rcond " << lu.rcond() << ")";
      fail(ErrorKind::ContourHitsSpectrum, msg.str());
    }
    total += (weight * z) * lu.solve(identity);
  }
  return total.real() / static_cast<double>(nodes);
}

}  // namespace

ProjectorResult riesz_projector(const OperatorMatrix& l, double radius, const ProjectorOptions& options) {
  if (!(radius > 0.0)) fail(ErrorKind::InvalidArgument, "contour radius must be positive");
  if (static_cast<std::size_t>(l.size()) > options.dense_cap)
    fail(ErrorKind::StateSpaceTooLarge, "projector is formed densely; state count above dense cap");
  const DenseMatrix dense = l.dense();
  ProjectorResult out;
  out.radius = radius;

  if (options.check_separation) {
    Eigen::EigenSolver<DenseMatrix> eig(dense, false);
    int inside = 0;
    double nearest = std::numeric_limits<double>::infinity();
    const double scale = eig.eigenvalues().cwiseAbs().maxCoeff();
    for (Eigen::Index k = 0; k < eig.eigenvalues().size(); ++k) {
      const double modulus = std::abs(eig.eigenvalues()[k]);
      if (modulus < radius) ++inside;
      if (modulus > 1e-9 * scale) nearest = std::min(nearest, modulus);
    }
    out.nearest_eigenvalue = nearest;
    if (inside != 1 || !(nearest > radius)) {
      std::ostringstream msg;
      msg << inside << " eigenvalues inside |z| < " << radius << ", nearest nonzero modulus "
          << nearest;
      fail(ErrorKind::ContourHitsSpectrum, msg.str());
    }
  }

  int nodes = options.initial_nodes;
  DenseMatrix p = quadrature_sum(dense, radius, nodes, 0, 1);
  for (;;) {
    if (2 * nodes > options.max_nodes) {
      std::ostringstream msg;
      msg << "no stabilization up to " << nodes << " nodes (last change " << out.quadrature_change << ")";
      fail(ErrorKind::QuadratureNotConverged, msg.str());
    }
    // The doubled rule reuses the current nodes at even positions.
    const DenseMatrix odd = quadrature_sum(dense, radius, 2 * nodes, 1, 2);
    const DenseMatrix refined = 0.5 * p + odd;
    out.quadrature_change = (refined - p).cwiseAbs().maxCoeff();
    p = refined;
    nodes *= 2;
    if (out.quadrature_change <= options.tolerance) break;
  }
  out.nodes = nodes;
  out.idempotency_defect = (p * p - p).cwiseAbs().maxCoeff();
  Eigen::BDCSVD<DenseMatrix> svd(p);
  const auto& sigma = svd.singularValues();
  out.sigma1 = sigma.size() > 0 ? sigma[0] : 0.0;
  out.sigma2 = sigma.size() > 1 ? sigma[1] : 0.0;
  out.rank = 0;
  for (Eigen::Index k = 0; k < sigma.size(); ++k)
    if (sigma[k] > 1e-6 * out.sigma1) ++out.rank;
  out.projector = std::move(p);
  return out;
}

Vector adjoint_projector_density(const ProjectorResult& p, const Measure& nu) {
  // P* 1 = D^{-1} P^T D 1 = D^{-1} P^T nu.
  Vector g = (p.projector.transpose() * nu.weights).cwiseQuotient(nu.weights);
  return g / nu_mean(nu, g);
}

RelativeBoundReport relative_bound_check(const OperatorMatrix& l0, const OperatorMatrix& a_op,
                                         const Measure& nu, double c0, double a,
                                         const std::vector<Vector>& samples,
                                         const std::vector<double>& lambdas) {
  RelativeBoundReport out;
  out.trials = static_cast<int>(samples.size());
  out.lambdas = lambdas;
  const double factor = c0 / std::sqrt(a);
  for (const auto& f : samples) {
    const double af = nu_norm(nu, a_op.apply(f));
    const double lf = nu_norm(nu, l0.apply(f));
    const double ff = nu_norm(nu, f);
    for (double lambda : lambdas) {
      const double bound = factor * (lf / lambda + lambda * ff);
      const double slack = bound - af;
      out.worst_slack = std::min(out.worst_slack, slack);
      if (bound > 0.0) out.worst_relative_slack = std::min(out.worst_relative_slack, slack / bound);
      if (slack < 0.0) {
        ++out.violations;
        out.largest_violation = std::max(out.largest_violation, -slack / std::max(af, 1e-300));
      }
    }
  }
  return out;
}

Vector random_trigonometric(const StateSpace& states, int degree, std::mt19937_64& engine, int terms) {
  std::normal_distribution<double> normal;
  const std::size_t sites = states.sites();
  // coefficients[t][s] holds (a_0, a_1, b_1, ..., a_d, b_d) for site s of term t.
  std::vector<std::vector<std::vector<double>>> coefficients(terms);
  for (auto& term : coefficients) {
    term.resize(sites);
    for (auto& site : term) {
      site.resize(2 * degree + 1);
      for (auto& c : site) c = normal(engine);
    }
  }
  Vector out(static_cast<Eigen::Index>(states.size()));
  std::vector<double> angles(sites);
  for (std::size_t k = 0; k < states.size(); ++k) {
    states.angles(k, angles);
    double value = 0.0;
    for (const auto& term : coefficients) {
      double product = 1.0;
      for (std::size_t s = 0; s < sites; ++s) {
        const auto& c = term[s];
        double local = c[0];
        for (int j = 1; j <= degree; ++j)
          local += c[2 * j - 1] * std::cos(j * angles[s]) + c[2 * j] * std::sin(j * angles[s]);
        product *= local;
      }
      value += product;
    }
    out[static_cast<Eigen::Index>(k)] = value;
  }
  return out;
}

void write_series_table(std::ostream& out, const SeriesResult& series) {
  out << "# k norm residual mean\n" << std::setprecision(17);
  for (std::size_t k = 0; k < series.coefficients.size(); ++k)
    out << k << ' ' << series.norms[k] << ' ' << (k == 0 ? 0.0 : series.residuals[k - 1]) << ' '
        << series.means[k] << '\n';
}

}  // namespace torusdiff
