#pragma once

// Data-parallel inner loops. Each kernel has a serial reference and an
// OpenMP version producing bit-identical output; the benchmark target
// compares them.

#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/SparseCore>

#include "torusdiff/model.hpp"

namespace torusdiff {

enum class Execution { Serial, Parallel };

using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;

namespace kernels {

/// Compressed rows with columns sorted inside each row.
struct CsrArrays {
  std::size_t rows = 0;
  std::vector<int> outer;
  std::vector<int> inner;
  std::vector<double> values;

  SparseMatrix to_sparse() const;
};

/// Coefficients of one central-difference stencil sum_i (a_i/2 D_i^2 + b_i D_i).
/// A null `diffusion` gives a pure first-order operator without diagonal.
struct StencilInput {
  const Lattice* lattice = nullptr;
  const StateSpace* states = nullptr;
  double mesh = 0.0;
  const SiteFunction* diffusion = nullptr;
  const SiteFunction* drift = nullptr;
};

struct StencilOutput {
  CsrArrays csr;
  /// Rows where some off-diagonal entry came out negative.
  std::size_t negative_rows = 0;
};

StencilOutput assemble_stencil_serial(const StencilInput& input);
StencilOutput assemble_stencil_parallel(const StencilInput& input);
StencilOutput assemble_stencil(const StencilInput& input, Execution execution);

void spmv_serial(const SparseMatrix& m, std::span<const double> x, std::span<double> y);
void spmv_parallel(const SparseMatrix& m, std::span<const double> x, std::span<double> y);

/// Euler-Maruyama on the continuum torus. Each path draws its normals from
/// its own engine seeded by (seed, path), so results do not depend on thread
/// scheduling.
struct PathInput {
  const Lattice* lattice = nullptr;
  const SiteFunction* diffusion = nullptr;
  const SiteFunction* drift = nullptr;
  std::span<const double> start;
  double dt = 0.0;
  std::size_t steps = 0;
  std::uint64_t seed = 0;
  /// Store the configuration every `record_stride` steps (0: final only).
  std::size_t record_stride = 0;
};

struct PathOutput {
  std::size_t paths = 0;
  std::size_t sites = 0;
  std::size_t frames = 0;
  /// frames x paths x sites, row-major; the last frame is the final state.
  std::vector<double> angles;
};

PathOutput euler_maruyama_serial(const PathInput& input, std::size_t paths);
PathOutput euler_maruyama_parallel(const PathInput& input, std::size_t paths);

namespace detail {

struct RowScratch {
  std::vector<double> angles;
  std::vector<std::pair<int, double>> entries;
};

/// Fills entries of one row; returns false if an off-diagonal is negative.
bool assemble_row(const StencilInput& input, std::size_t row, Configuration& eta,
                  std::vector<std::pair<int, double>>& entries);

std::size_t row_width(const StencilInput& input);

void simulate_path(const PathInput& input, std::size_t path, std::size_t frames,
                   std::size_t paths, std::vector<double>& out, Configuration& eta,
                   std::vector<double>& drift, std::vector<double>& sigma);

}  // namespace detail

}  // namespace kernels
}  // namespace torusdiff
