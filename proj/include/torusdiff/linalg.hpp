#pragma once

// Solvers for the singular systems that appear throughout: every generator
// (and its adjoint) has a one-dimensional kernel, so plain factorizations
// are replaced by bordered or grounded reformulations.

#include <memory>

#include <Eigen/Dense>
#include <Eigen/SparseCore>

namespace torusdiff {

using ColMajorSparse = Eigen::SparseMatrix<double, Eigen::ColMajor>;

/// Factorizes [K c; r^T 0] once and solves K x = b subject to r^T x = 0.
/// Nonsingular exactly when ker K is one-dimensional, r is not orthogonal to
/// it and c is not in range K.
class BorderedSolver {
 public:
  BorderedSolver(const ColMajorSparse& k, const Eigen::VectorXd& column, const Eigen::VectorXd& row);
  ~BorderedSolver();
  BorderedSolver(BorderedSolver&&) noexcept;
  BorderedSolver& operator=(BorderedSolver&&) noexcept;

  /// Returns x; `multiplier` receives the bordering unknown (zero when b is
  /// consistent).
  Eigen::VectorXd solve(const Eigen::VectorXd& b, double* multiplier = nullptr) const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// Deletes row and column `ground` of K and solves the reduced system with
/// x[ground] = 0. For a consistent right-hand side this yields one member of
/// the solution line.
class GroundedSolver {
 public:
  GroundedSolver(const ColMajorSparse& k, Eigen::Index ground);
  ~GroundedSolver();
  GroundedSolver(GroundedSolver&&) noexcept;
  GroundedSolver& operator=(GroundedSolver&&) noexcept;

  Eigen::VectorXd solve(const Eigen::VectorXd& b) const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// K with row and column `ground` removed.
ColMajorSparse remove_row_and_column(const ColMajorSparse& k, Eigen::Index ground);

struct GmresResult {
  Eigen::VectorXd x;
  int iterations = 0;
  double error = 0.0;
  bool converged = false;
};

/// Restarted GMRES with an incomplete LU preconditioner.
GmresResult gmres_ilut(const ColMajorSparse& a, const Eigen::VectorXd& b, double tolerance,
                       int max_iterations, int restart = 60);

}  // namespace torusdiff
