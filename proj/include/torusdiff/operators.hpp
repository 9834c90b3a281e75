#pragma once

#include <iosfwd>
#include <string>
#include <utility>

#include <Eigen/Dense>
#include <Eigen/SparseCore>

#include "torusdiff/kernels.hpp"
#include "torusdiff/model.hpp"

namespace torusdiff {

using Vector = Eigen::VectorXd;
using DenseMatrix = Eigen::MatrixXd;

enum class OperatorTag { Generator, FirstOrder, Adjoint, SymmetricPart, AntisymmetricPart };

std::string to_string(OperatorTag tag);

/// Sparse square matrix over the enumerated state space.
class OperatorMatrix {
 public:
  OperatorMatrix(SparseMatrix matrix, OperatorTag tag, std::string provenance, double mesh);

  const SparseMatrix& matrix() const noexcept { return matrix_; }
  OperatorTag tag() const noexcept { return tag_; }
  const std::string& provenance() const noexcept { return provenance_; }
  double mesh() const noexcept { return mesh_; }
  Eigen::Index size() const noexcept { return matrix_.rows(); }

  Vector apply(const Vector& f, Execution execution = Execution::Parallel) const;
  /// Row sums accumulated in storage order.
  Vector row_sums() const;
  DenseMatrix dense() const { return DenseMatrix(matrix_); }
  /// Induced 1-norm: max over columns of sum |entries|.
  double l1_norm() const;

 private:
  SparseMatrix matrix_;
  OperatorTag tag_;
  std::string provenance_;
  double mesh_;
};

enum class SolverKind { Exact, DenseNullSpace, GroundedGmres, GroundedSparseLU };

std::string to_string(SolverKind kind);

/// Normalized nonnegative weights over states.
struct Measure {
  Vector weights;
  double residual = 0.0;
  SolverKind solver = SolverKind::Exact;

  static Measure uniform(Eigen::Index size);
  Eigen::Index size() const noexcept { return weights.size(); }
};

// Inner products and norms of L2[nu].
double nu_inner(const Measure& nu, const Vector& f, const Vector& g);
double nu_norm(const Measure& nu, const Vector& f);
double nu_mean(const Measure& nu, const Vector& f);
Vector centered(const Measure& nu, const Vector& f);

/// L = sum_i (a_i/2 D_i^2 + b_i D_i) with central differences. Rows sum to
/// exactly zero. Throws MeshTooCoarse when an off-diagonal rate is negative.
OperatorMatrix assemble_generator(const DiffusionSpec& spec, Execution execution = Execution::Parallel);
/// Generator with drift b + eps c.
OperatorMatrix assemble_perturbed_generator(const DiffusionSpec& spec, const PerturbationField& c,
                                            double eps, Execution execution = Execution::Parallel);
/// A = sum_i c_i D_i.
OperatorMatrix assemble_first_order(const PerturbationField& c, const Lattice& lattice,
                                    const Grid& grid, std::size_t cap = kDefaultStateCap,
                                    Execution execution = Execution::Parallel);

inline constexpr double kMeasureFloor = 1e-30;

/// D_nu^{-1} M^T D_nu. Throws DegenerateMeasure if some weight <= floor.
OperatorMatrix nu_adjoint(const OperatorMatrix& m, const Measure& nu, double floor = kMeasureFloor);

struct SymmetricSplit {
  OperatorMatrix symmetric;
  OperatorMatrix antisymmetric;
};
SymmetricSplit symmetrize(const OperatorMatrix& l, const Measure& nu);

struct DirichletForm {
  double lhs = 0.0;  ///< (f, L f)_nu
  double rhs = 0.0;  ///< -sum_i <(a_i/2) (D_i f)^2>_nu
};
/// Both sides of the Dirichlet-form identity; they agree to O(h^2).
DirichletForm dirichlet_form(const OperatorMatrix& l, const DiffusionSpec& spec, const Measure& nu,
                             const Vector& f);

/// Central difference D_i f on the grid.
Vector central_difference(const StateSpace& states, double mesh, std::size_t site, const Vector& f);

/// Grid function values f(eta) for every state.
Vector tabulate(const StateSpace& states, const std::function<double(std::span<const double>)>& fn);

/// Triplet text: "N nnz" header then "row col value" lines with 17
/// significant digits.
void write_triplets(std::ostream& out, const OperatorMatrix& m);
SparseMatrix read_triplets(std::istream& in);

}  // namespace torusdiff
