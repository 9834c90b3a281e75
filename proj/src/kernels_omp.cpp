#include <omp.h>

#include "torusdiff/kernels.hpp"

namespace torusdiff::kernels {

StencilOutput assemble_stencil_parallel(const StencilInput& input) {
  const auto rows = static_cast<std::int64_t>(input.states->size());
  const std::size_t width = detail::row_width(input);
  StencilOutput out;
  out.csr.rows = static_cast<std::size_t>(rows);
  out.csr.outer.resize(rows + 1);
  out.csr.inner.resize(rows * width);
  out.csr.values.resize(rows * width);
  std::size_t negative = 0;
#pragma omp parallel reduction(+ : negative)
  {
    Configuration eta(*input.lattice, std::vector<double>(input.states->sites()));
    std::vector<std::pair<int, double>> entries;
#pragma omp for schedule(static)
    for (std::int64_t r = 0; r < rows; ++r) {
      const auto row = static_cast<std::size_t>(r);
      if (!detail::assemble_row(input, row, eta, entries)) ++negative;
      out.csr.outer[row] = static_cast<int>(row * width);
      for (std::size_t k = 0; k < width; ++k) {
        out.csr.inner[row * width + k] = entries[k].first;
        out.csr.values[row * width + k] = entries[k].second;
      }
    }
  }
  out.csr.outer[rows] = static_cast<int>(rows * width);
  out.negative_rows = negative;
  return out;
}

void spmv_parallel(const SparseMatrix& m, std::span<const double> x, std::span<double> y) {
  const auto rows = static_cast<std::int64_t>(m.outerSize());
#pragma omp parallel for schedule(static)
  for (std::int64_t r = 0; r < rows; ++r) {
    double acc = 0.0;
    for (SparseMatrix::InnerIterator it(m, r); it; ++it) acc += it.value() * x[it.col()];
    y[r] = acc;
  }
}

PathOutput euler_maruyama_parallel(const PathInput& input, std::size_t paths) {
  PathOutput out;
  out.paths = paths;
  out.sites = input.lattice->site_count();
  out.frames = (input.record_stride ? (input.steps + input.record_stride - 1) / input.record_stride : 0) + 1;
  out.angles.resize(out.frames * paths * out.sites);
  const auto count = static_cast<std::int64_t>(paths);
#pragma omp parallel
  {
    Configuration eta(*input.lattice, std::vector<double>(out.sites));
    std::vector<double> drift(out.sites), sigma(out.sites);
#pragma omp for schedule(dynamic, 64)
    for (std::int64_t p = 0; p < count; ++p)
      detail::simulate_path(input, static_cast<std::size_t>(p), out.frames, paths, out.angles, eta,
                            drift, sigma);
  }
  return out;
}

}  // namespace torusdiff::kernels
