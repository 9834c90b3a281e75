#include "torusdiff/operators.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <istream>
#include <ostream>
#include <sstream>
#include <vector>

#include "torusdiff/errors.hpp"

namespace torusdiff {

std::string to_string(OperatorTag tag) {
  switch (tag) {
    case OperatorTag::Generator: return "Generator";
    case OperatorTag::FirstOrder: return "FirstOrder";
    case OperatorTag::Adjoint: return "Adjoint";
    case OperatorTag::SymmetricPart: return "SymmetricPart";
    case OperatorTag::AntisymmetricPart: return "AntisymmetricPart";
  }
  return "Unknown";
}

std::string to_string(SolverKind kind) {
  switch (kind) {
    case SolverKind::Exact: return "exact";
    case SolverKind::DenseNullSpace: return "dense-null-space";
    case SolverKind::GroundedGmres: return "grounded-gmres";
    case SolverKind::GroundedSparseLU: return "grounded-sparse-lu";
  }
  return "unknown";
}

OperatorMatrix::OperatorMatrix(SparseMatrix matrix, OperatorTag tag, std::string provenance,
                               double mesh)
    : matrix_(std::move(matrix)), tag_(tag), provenance_(std::move(provenance)), mesh_(mesh) {
  matrix_.makeCompressed();
}

Vector OperatorMatrix::apply(const Vector& f, Execution execution) const {
  Vector out(matrix_.rows());
  std::span<const double> x(f.data(), static_cast<std::size_t>(f.size()));
  std::span<double> y(out.data(), static_cast<std::size_t>(out.size()));
  if (execution == Execution::Serial)
    kernels::spmv_serial(matrix_, x, y);
  else
    kernels::spmv_parallel(matrix_, x, y);
  return out;
}

Vector OperatorMatrix::row_sums() const {
  Vector sums = Vector::Zero(matrix_.rows());
  for (Eigen::Index r = 0; r < matrix_.outerSize(); ++r)
    for (SparseMatrix::InnerIterator it(matrix_, r); it; ++it) sums[r] += it.value();
  return sums;
}

double OperatorMatrix::l1_norm() const {
  std::vector<double> columns(static_cast<std::size_t>(matrix_.cols()), 0.0);
  for (Eigen::Index r = 0; r < matrix_.outerSize(); ++r)
    for (SparseMatrix::InnerIterator it(matrix_, r); it; ++it)
      columns[static_cast<std::size_t>(it.col())] += std::abs(it.value());
  return columns.empty() ? 0.0 : *std::max_element(columns.begin(), columns.end());
}

Measure Measure::uniform(Eigen::Index size) {
  Measure m;
  m.weights = Vector::Constant(size, 1.0 / static_cast<double>(size));
  m.solver = SolverKind::Exact;
  return m;
}

double nu_inner(const Measure& nu, const Vector& f, const Vector& g) {
  return (nu.weights.array() * f.array() * g.array()).sum();
}

double nu_norm(const Measure& nu, const Vector& f) { return std::sqrt(nu_inner(nu, f, f)); }

double nu_mean(const Measure& nu, const Vector& f) { return nu.weights.dot(f); }

Vector centered(const Measure& nu, const Vector& f) {
  return f.array() - nu_mean(nu, f);
}

namespace {

OperatorMatrix assemble_stencil_operator(const Lattice& lattice, const Grid& grid,
                                         std::size_t cap, const SiteFunction* diffusion,
                                         const SiteFunction& drift, OperatorTag tag,
                                         std::string provenance, Execution execution) {
  const StateSpace states(lattice, grid, cap);
  kernels::StencilInput input{&lattice, &states, grid.mesh(), diffusion, &drift};
  auto out = kernels::assemble_stencil(input, execution);
  if (out.negative_rows > 0) {
    std::ostringstream msg;
    msg << out.negative_rows << " rows with negative off-diagonal rates at h=" << grid.mesh()
        << "; refine the grid (need h*|b| < a)";
    fail(ErrorKind::MeshTooCoarse, msg.str());
  }
  return OperatorMatrix(out.csr.to_sparse(), tag, std::move(provenance), grid.mesh());
}

}  // namespace

OperatorMatrix assemble_generator(const DiffusionSpec& spec, Execution execution) {
  compute_ellipticity_bound(spec.coefficients, spec.lattice, spec.grid);
  return assemble_stencil_operator(spec.lattice, spec.grid, spec.state_cap,
                                   &spec.coefficients.diffusion, spec.coefficients.drift,
                                   OperatorTag::Generator, "L: " + spec.label, execution);
}

OperatorMatrix assemble_perturbed_generator(const DiffusionSpec& spec, const PerturbationField& c,
                                            double eps, Execution execution) {
  compute_ellipticity_bound(spec.coefficients, spec.lattice, spec.grid);
  const auto field = perturbed_coefficients(spec.coefficients, c, eps);
  std::ostringstream label;
  label << "L0 + " << std::setprecision(17) << eps << " A: " << spec.label << " / "
        << c.description;
  return assemble_stencil_operator(spec.lattice, spec.grid, spec.state_cap, &field.diffusion,
                                   field.drift, OperatorTag::Generator, label.str(), execution);
}

OperatorMatrix assemble_first_order(const PerturbationField& c, const Lattice& lattice,
                                    const Grid& grid, std::size_t cap, Execution execution) {
  return assemble_stencil_operator(lattice, grid, cap, nullptr, c.coefficient,
                                   OperatorTag::FirstOrder, "A: " + c.description, execution);
}

OperatorMatrix nu_adjoint(const OperatorMatrix& m, const Measure& nu, double floor) {
  const auto& w = nu.weights;
  if (w.size() != m.size()) fail(ErrorKind::InvalidArgument, "measure size mismatch");
  for (Eigen::Index k = 0; k < w.size(); ++k)
    if (!(w[k] > floor)) {
      std::ostringstream msg;
      msg << "weight " << w[k] << " at state " << k << " is not above " << floor;
      fail(ErrorKind::DegenerateMeasure, msg.str());
    }
  std::vector<Eigen::Triplet<double>> entries;
  entries.reserve(static_cast<std::size_t>(m.matrix().nonZeros()));
  for (Eigen::Index r = 0; r < m.matrix().outerSize(); ++r)
    for (SparseMatrix::InnerIterator it(m.matrix(), r); it; ++it)
      entries.emplace_back(it.col(), r, it.value() * (w[r] / w[it.col()]));
  SparseMatrix out(m.size(), m.size());
  out.setFromTriplets(entries.begin(), entries.end());
  return OperatorMatrix(std::move(out), OperatorTag::Adjoint, "adjoint(" + m.provenance() + ")",
                        m.mesh());
}

SymmetricSplit symmetrize(const OperatorMatrix& l, const Measure& nu) {
  const auto adjoint = nu_adjoint(l, nu);
  SparseMatrix sym = 0.5 * (l.matrix() + adjoint.matrix());
  SparseMatrix skew = 0.5 * (l.matrix() - adjoint.matrix());
  return {OperatorMatrix(std::move(sym), OperatorTag::SymmetricPart, "sym(" + l.provenance() + ")",
                         l.mesh()),
          OperatorMatrix(std::move(skew), OperatorTag::AntisymmetricPart,
                         "skew(" + l.provenance() + ")", l.mesh())};
}

Vector central_difference(const StateSpace& states, double mesh, std::size_t site, const Vector& f) {
  Vector out(f.size());
  for (Eigen::Index k = 0; k < f.size(); ++k) {
    const auto idx = static_cast<std::size_t>(k);
    out[k] = (f[states.shift(idx, site, +1)] - f[states.shift(idx, site, -1)]) / (2.0 * mesh);
  }
  return out;
}

DirichletForm dirichlet_form(const OperatorMatrix& l, const DiffusionSpec& spec, const Measure& nu,
                             const Vector& f) {
  DirichletForm out;
  out.lhs = nu_inner(nu, f, l.apply(f));
  const auto states = spec.states();
  Configuration eta(spec.lattice, std::vector<double>(states.sites()));
  double rhs = 0.0;
  for (std::size_t s = 0; s < states.sites(); ++s) {
    const Vector grad = central_difference(states, spec.grid.mesh(), s, f);
    for (Eigen::Index k = 0; k < f.size(); ++k) {
      states.angles(static_cast<std::size_t>(k), eta.mutable_angles());
      rhs += nu.weights[k] * 0.5 * spec.coefficients.diffusion(eta, s) * grad[k] * grad[k];
    }
  }
  out.rhs = -rhs;
  return out;
}

Vector tabulate(const StateSpace& states, const std::function<double(std::span<const double>)>& fn) {
  Vector out(static_cast<Eigen::Index>(states.size()));
  std::vector<double> angles(states.sites());
  for (std::size_t k = 0; k < states.size(); ++k) {
    states.angles(k, angles);
    out[static_cast<Eigen::Index>(k)] = fn(angles);
  }
  return out;
}

void write_triplets(std::ostream& out, const OperatorMatrix& m) {
  out << m.size() << ' ' << m.matrix().nonZeros() << '\n';
  out << std::setprecision(17);
  for (Eigen::Index r = 0; r < m.matrix().outerSize(); ++r)
    for (SparseMatrix::InnerIterator it(m.matrix(), r); it; ++it)
      out << r << ' ' << it.col() << ' ' << it.value() << '\n';
}

SparseMatrix read_triplets(std::istream& in) {
  Eigen::Index n = 0, nnz = 0;
  if (!(in >> n >> nnz)) fail(ErrorKind::InvalidArgument, "bad triplet header");
  std::vector<Eigen::Triplet<double>> entries;
  entries.reserve(static_cast<std::size_t>(nnz));
  for (Eigen::Index k = 0; k < nnz; ++k) {
    Eigen::Index r = 0, c = 0;
    double v = 0.0;
    if (!(in >> r >> c >> v)) fail(ErrorKind::InvalidArgument, "truncated triplet file");
    entries.emplace_back(r, c, v);
  }
  SparseMatrix m(n, n);
  m.setFromTriplets(entries.begin(), entries.end());
  return m;
}

}  // namespace torusdiff
