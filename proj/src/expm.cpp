#include "torusdiff/expm.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <sstream>

#include <unsupported/Eigen/MatrixFunctions>

#include "torusdiff/errors.hpp"

namespace torusdiff {

namespace {

double round_up_two_digits(double x) {
  const double s = std::pow(10.0, std::floor(std::log10(x)) - 1.0);
  return std::ceil(x / s) * s;
}

double infinity_norm(const SparseMatrix& a) {
  double best = 0.0;
  for (Eigen::Index r = 0; r < a.outerSize(); ++r) {
    double sum = 0.0;
    for (SparseMatrix::InnerIterator it(a, r); it; ++it) sum += std::abs(it.value());
    best = std::max(best, sum);
  }
  return best;
}

}  // namespace

Vector krylov_expv(const SparseMatrix& a, const Vector& v, double t, int dimension, double tolerance) {
  const Eigen::Index n = a.rows();
  const int m = static_cast<int>(std::min<Eigen::Index>(dimension, n));
  const double norm_a = infinity_norm(a);
  Vector w = v;
  double beta = w.norm();
  if (beta == 0.0 || t == 0.0 || norm_a == 0.0) return w;

  constexpr double kGamma = 0.9;
  constexpr double kDelta = 1.2;
  const double breakdown_tol = 1e-14 * norm_a;
  const double fact = std::pow((m + 1) / std::numbers::e, m + 1) * std::sqrt(2.0 * std::numbers::pi * (m + 1));
  double t_new = (1.0 / norm_a) * std::pow((fact * tolerance) / (4.0 * beta * norm_a), 1.0 / m);
  t_new = round_up_two_digits(t_new);

  double t_now = 0.0;
  int steps = 0;
  DenseMatrix basis(n, m + 1);
  while (t_now < t) {
    if (++steps > 100000) fail(ErrorKind::NoConvergence, "Krylov exponential took too many steps");
    double t_step = std::min(t - t_now, t_new);
    DenseMatrix h = DenseMatrix::Zero(m + 2, m + 2);
    basis.col(0) = w / beta;
    int basis_size = m;
    bool breakdown = false;
    for (int j = 0; j < m; ++j) {
      Vector p = a * basis.col(j);
      for (int i = 0; i <= j; ++i) {
        h(i, j) = basis.col(i).dot(p);
        p -= h(i, j) * basis.col(i);
      }
      const double s = p.norm();
      if (s < breakdown_tol) {
        breakdown = true;
        basis_size = j + 1;
        t_step = t - t_now;
        break;
      }
      h(j + 1, j) = s;
      basis.col(j + 1) = p / s;
    }
    double av_norm = 0.0;
    if (!breakdown) {
      h(m + 1, m) = 1.0;
      av_norm = (a * basis.col(m)).norm();
    }
    const int extra = breakdown ? 0 : 2;
    DenseMatrix f;
    double error = 0.0;
    for (int attempt = 0;; ++attempt) {
      const int mx = basis_size + extra;
      f = (t_step * h.topLeftCorner(mx, mx)).exp();
      if (breakdown) break;
      const double phi1 = std::abs(beta * f(m, 0));
      const double phi2 = std::abs(beta * f(m + 1, 0) * av_norm);
      double exponent = 1.0 / m;
      if (phi1 > 10.0 * phi2) {
        error = phi2;
      } else if (phi1 > phi2) {
        error = phi1 * phi2 / (phi1 - phi2);
      } else {
        error = phi1;
        exponent = 1.0 / std::max(1, m - 1);
      }
      if (error <= kDelta * t_step * tolerance) break;
      if (attempt >= 20) fail(ErrorKind::NoConvergence, "Krylov step size control failed");
      t_step = kGamma * t_step * std::pow(t_step * tolerance / error, exponent);
      t_step = round_up_two_digits(t_step);
    }
    const int used = basis_size + std::max(0, extra - 1);
    w = basis.leftCols(std::min(used, m + 1)) * (beta * f.col(0).head(std::min(used, m + 1)));
    beta = w.norm();
    t_now += t_step;
    if (!breakdown) {
      const double exponent = 1.0 / m;
      t_new = kGamma * t_step * std::pow(t_step * tolerance / std::max(error, 1e-300), exponent);
      t_new = round_up_two_digits(std::min(t_new, 1e3 * t_step + 1e-300));
    }
    if (beta == 0.0) break;
  }
  return w;
}

Semigroup::Semigroup(const OperatorMatrix& l, SemigroupOptions options)
    : l_(&l), options_(options), dense_(static_cast<std::size_t>(l.size()) <= options.dense_cap) {
  if (dense_) dense_matrix_ = l.dense();
}

Vector Semigroup::apply(const Vector& f, double t) const {
  if (t < 0.0) fail(ErrorKind::InvalidArgument, "semigroup time must be nonnegative");
  if (t == 0.0) return f;
  if (dense_) return DenseMatrix((t * dense_matrix_).exp()) * f;
  return krylov_expv(l_->matrix(), f, t, options_.krylov_dimension, options_.tolerance);
}

std::vector<Vector> Semigroup::trajectory(const Vector& f, std::span<const double> times) const {
  std::vector<Vector> out;
  out.reserve(times.size());
  Vector current = f;
  double now = 0.0;
  // Equal increments reuse one propagator on the dense route.
  std::map<double, DenseMatrix> propagators;
  for (double t : times) {
    if (t < now) fail(ErrorKind::InvalidArgument, "time grid must be nondecreasing and start at >= 0");
    const double dt = t - now;
    if (dt > 0.0) {
      if (dense_) {
        auto it = propagators.find(dt);
        if (it == propagators.end()) it = propagators.emplace(dt, (dt * dense_matrix_).exp()).first;
        current = it->second * current;
      } else {
        current = krylov_expv(l_->matrix(), current, dt, options_.krylov_dimension, options_.tolerance);
      }
    }
    now = t;
    out.push_back(current);
  }
  return out;
}

Vector semigroup_apply(const OperatorMatrix& l, const Vector& f, double t,
                       const SemigroupOptions& options) {
  return Semigroup(l, options).apply(f, t);
}

double semigroup_residual(const OperatorMatrix& l, const Vector& f, double t, double step,
                          const SemigroupOptions& options) {
  const Semigroup semigroup(l, options);
  const Vector at = semigroup.apply(f, t);
  auto central = [&](double d) {
    // S_{t +- d} = S_{+-d} S_t so negative shifts never occur.
    const Vector forward = semigroup.apply(at, d);
    const Vector back = t >= d ? semigroup.apply(f, t - d) : Vector(at - d * l.apply(at));
    return Vector((forward - back) / (2.0 * d));
  };
  const Vector coarse = central(step);
  const Vector fine = central(0.5 * step);
  const Vector extrapolated = (4.0 * fine - coarse) / 3.0;
  const Vector generator = l.apply(at);
  const double scale = generator.norm();
  return scale > 0.0 ? (extrapolated - generator).norm() / scale : (extrapolated - generator).norm();
}

}  // namespace torusdiff
