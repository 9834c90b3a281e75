#include "torusdiff/linalg.hpp"

#include <vector>

#include <Eigen/SparseLU>
#include <unsupported/Eigen/IterativeSolvers>

#include "torusdiff/errors.hpp"

namespace torusdiff {

struct BorderedSolver::Impl {
  Eigen::Index n = 0;
  Eigen::SparseLU<ColMajorSparse, Eigen::COLAMDOrdering<int>> lu;
};

BorderedSolver::BorderedSolver(const ColMajorSparse& k, const Eigen::VectorXd& column,
                               const Eigen::VectorXd& row)
    : impl_(std::make_unique<Impl>()) {
  const Eigen::Index n = k.rows();
  impl_->n = n;
  std::vector<Eigen::Triplet<double>> entries;
  entries.reserve(static_cast<std::size_t>(k.nonZeros() + 2 * n));
  for (Eigen::Index c = 0; c < k.outerSize(); ++c)
    for (ColMajorSparse::InnerIterator it(k, c); it; ++it)
      entries.emplace_back(it.row(), it.col(), it.value());
  for (Eigen::Index i = 0; i < n; ++i) {
    if (column[i] != 0.0) entries.emplace_back(i, n, column[i]);
    if (row[i] != 0.0) entries.emplace_back(n, i, row[i]);
  }
  ColMajorSparse bordered(n + 1, n + 1);
  bordered.setFromTriplets(entries.begin(), entries.end());
  bordered.makeCompressed();
  impl_->lu.compute(bordered);
  if (impl_->lu.info() != Eigen::Success)
    fail(ErrorKind::NonUniqueKernel, "bordered system is singular: " + impl_->lu.lastErrorMessage());
}

BorderedSolver::~BorderedSolver() = default;
BorderedSolver::BorderedSolver(BorderedSolver&&) noexcept = default;
BorderedSolver& BorderedSolver::operator=(BorderedSolver&&) noexcept = default;

Eigen::VectorXd BorderedSolver::solve(const Eigen::VectorXd& b, double* multiplier) const {
  Eigen::VectorXd rhs(impl_->n + 1);
  rhs.head(impl_->n) = b;
  rhs[impl_->n] = 0.0;
  Eigen::VectorXd x = impl_->lu.solve(rhs);
  if (impl_->lu.info() != Eigen::Success) fail(ErrorKind::NoConvergence, "bordered solve failed");
  if (multiplier) *multiplier = x[impl_->n];
  return x.head(impl_->n);
}

ColMajorSparse remove_row_and_column(const ColMajorSparse& k, Eigen::Index ground) {
  const Eigen::Index n = k.rows();
  std::vector<Eigen::Triplet<double>> entries;
  entries.reserve(static_cast<std::size_t>(k.nonZeros()));
  auto shrink = [ground](Eigen::Index i) { return i < ground ? i : i - 1; };
  for (Eigen::Index c = 0; c < k.outerSize(); ++c) {
    if (c == ground) continue;
    for (ColMajorSparse::InnerIterator it(k, c); it; ++it)
      if (it.row() != ground) entries.emplace_back(shrink(it.row()), shrink(c), it.value());
  }
  ColMajorSparse out(n - 1, n - 1);
  out.setFromTriplets(entries.begin(), entries.end());
  out.makeCompressed();
  return out;
}

struct GroundedSolver::Impl {
  Eigen::Index n = 0;
  Eigen::Index ground = 0;
  Eigen::SparseLU<ColMajorSparse, Eigen::COLAMDOrdering<int>> lu;
};

GroundedSolver::GroundedSolver(const ColMajorSparse& k, Eigen::Index ground)
    : impl_(std::make_unique<Impl>()) {
  impl_->n = k.rows();
  impl_->ground = ground;
  impl_->lu.compute(remove_row_and_column(k, ground));
  if (impl_->lu.info() != Eigen::Success)
    fail(ErrorKind::NonUniqueKernel, "grounded system is singular: " + impl_->lu.lastErrorMessage());
}

GroundedSolver::~GroundedSolver() = default;
GroundedSolver::GroundedSolver(GroundedSolver&&) noexcept = default;
GroundedSolver& GroundedSolver::operator=(GroundedSolver&&) noexcept = default;

Eigen::VectorXd GroundedSolver::solve(const Eigen::VectorXd& b) const {
  const Eigen::Index n = impl_->n;
  const Eigen::Index g = impl_->ground;
  Eigen::VectorXd reduced(n - 1);
  reduced.head(g) = b.head(g);
  reduced.tail(n - 1 - g) = b.tail(n - 1 - g);
  Eigen::VectorXd y = impl_->lu.solve(reduced);
  Eigen::VectorXd x(n);
  x.head(g) = y.head(g);
  x[g] = 0.0;
  x.tail(n - 1 - g) = y.tail(n - 1 - g);
  return x;
}

GmresResult gmres_ilut(const ColMajorSparse& a, const Eigen::VectorXd& b, double tolerance,
                       int max_iterations, int restart) {
  Eigen::GMRES<ColMajorSparse, Eigen::IncompleteLUT<double>> solver;
  solver.preconditioner().setDroptol(1e-6);
  solver.preconditioner().setFillfactor(20);
  solver.set_restart(restart);
  solver.setTolerance(tolerance);
  solver.setMaxIterations(max_iterations);
  solver.compute(a);
  GmresResult out;
  out.x = solver.solve(b);
  out.iterations = static_cast<int>(solver.iterations());
  out.error = solver.error();
  out.converged = solver.info() == Eigen::Success;
  return out;
}

}  // namespace torusdiff
