#pragma once

#include <span>
#include <vector>

#include "torusdiff/operators.hpp"

namespace torusdiff {

struct SemigroupOptions {
  /// Up to this many states the full matrix exponential is formed.
  std::size_t dense_cap = 512;
  int krylov_dimension = 30;
  double tolerance = 1e-12;
};

/// S_t = exp(t L). Dense scaling-and-squaring below the dense cap, Krylov
/// (Arnoldi) exponential action above it.
class Semigroup {
 public:
  explicit Semigroup(const OperatorMatrix& l, SemigroupOptions options = {});

  bool dense() const noexcept { return dense_; }
  Vector apply(const Vector& f, double t) const;
  /// S_t f at every time of a nondecreasing grid, stepping from one time to
  /// the next.
  std::vector<Vector> trajectory(const Vector& f, std::span<const double> times) const;

 private:
  const OperatorMatrix* l_;
  SemigroupOptions options_;
  bool dense_;
  DenseMatrix dense_matrix_;
};

Vector semigroup_apply(const OperatorMatrix& l, const Vector& f, double t,
                       const SemigroupOptions& options = {});

/// || (S_{t+d} f - S_{t-d} f) / 2d - L S_t f || / ||L S_t f|| with the
/// Richardson-extrapolated central difference (steps d and d/2).
double semigroup_residual(const OperatorMatrix& l, const Vector& f, double t, double step = 1e-3,
                          const SemigroupOptions& options = {});

/// exp(t A) v by restarted Arnoldi with local error control.
Vector krylov_expv(const SparseMatrix& a, const Vector& v, double t, int dimension = 30,
                   double tolerance = 1e-12);

}  // namespace torusdiff
