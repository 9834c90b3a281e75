#include <algorithm>
#include <cmath>
#include <random>

#include "torusdiff/kernels.hpp"

namespace torusdiff::kernels {

SparseMatrix CsrArrays::to_sparse() const {
  const auto nnz = static_cast<Eigen::Index>(values.size());
  Eigen::Map<const SparseMatrix> view(static_cast<Eigen::Index>(rows),
                                      static_cast<Eigen::Index>(rows), nnz, outer.data(),
                                      inner.data(), values.data());
  return SparseMatrix(view);
}

namespace detail {

namespace {

// Rounds every entry of the row to a multiple of 2^(E-52), where 2^E bounds
// the row's absolute sum. All partial sums of the rounded entries are then
// exactly representable, so row sums vanish in any summation order.
void quantize(std::vector<std::pair<int, double>>& entries) {
  double total = 0.0;
  for (const auto& e : entries) total += std::abs(e.second);
  if (total == 0.0) return;
  const int exponent = std::ilogb(total) + 2;
  for (auto& e : entries)
    e.second = std::ldexp(std::nearbyint(std::ldexp(e.second, 52 - exponent)), exponent - 52);
}

}  // namespace

std::size_t row_width(const StencilInput& input) {
  return 2 * input.states->sites() + (input.diffusion ? 1 : 0);
}

bool assemble_row(const StencilInput& input, std::size_t row, Configuration& eta,
                  std::vector<std::pair<int, double>>& entries) {
  const auto& states = *input.states;
  const double h = input.mesh;
  states.angles(row, eta.mutable_angles());
  entries.clear();
  bool nonnegative = true;
  for (std::size_t s = 0; s < states.sites(); ++s) {
    const double a = input.diffusion ? (*input.diffusion)(eta, s) : 0.0;
    const double b = (*input.drift)(eta, s);
    const double second = a / (2.0 * h * h);
    const double first = b / (2.0 * h);
    const double up = second + first;
    const double down = second - first;
    if (input.diffusion && (up < 0.0 || down < 0.0)) nonnegative = false;
    entries.emplace_back(static_cast<int>(states.shift(row, s, +1)), up);
    entries.emplace_back(static_cast<int>(states.shift(row, s, -1)), down);
  }
  quantize(entries);
  if (input.diffusion) {
    double diagonal = 0.0;
    for (const auto& e : entries) diagonal -= e.second;
    entries.emplace_back(static_cast<int>(row), diagonal);
  }
  std::sort(entries.begin(), entries.end(),
            [](const auto& x, const auto& y) { return x.first < y.first; });
  return nonnegative;
}

void simulate_path(const PathInput& input, std::size_t path, std::size_t frames,
                   std::size_t paths, std::vector<double>& out, Configuration& eta,
                   std::vector<double>& drift, std::vector<double>& sigma) {
  const std::size_t sites = input.lattice->site_count();
  std::seed_seq seq{static_cast<std::uint32_t>(input.seed), static_cast<std::uint32_t>(input.seed >> 32),
                    static_cast<std::uint32_t>(path), static_cast<std::uint32_t>(path >> 32)};
  std::mt19937_64 engine(seq);
  std::normal_distribution<double> normal(0.0, 1.0);

  auto& x = eta.mutable_angles();
  std::copy(input.start.begin(), input.start.end(), x.begin());
  auto store = [&](std::size_t frame) {
    std::copy(x.begin(), x.end(), out.begin() + (frame * paths + path) * sites);
  };
  std::size_t frame = 0;
  const double root_dt = std::sqrt(input.dt);
  for (std::size_t step = 0; step < input.steps; ++step) {
    if (input.record_stride && step % input.record_stride == 0 && frame + 1 < frames) store(frame++);
    for (std::size_t s = 0; s < sites; ++s) {
      drift[s] = (*input.drift)(eta, s);
      sigma[s] = std::sqrt((*input.diffusion)(eta, s)) * root_dt;
    }
    for (std::size_t s = 0; s < sites; ++s) {
      double next = x[s] + drift[s] * input.dt + sigma[s] * normal(engine);
      next = std::fmod(next, kTwoPi);
      if (next < 0.0) next += kTwoPi;
      x[s] = next;
    }
  }
  store(frames - 1);
}

}  // namespace detail

namespace {

std::size_t frame_count(const PathInput& input) {
  return (input.record_stride ? (input.steps + input.record_stride - 1) / input.record_stride : 0) + 1;
}

}  // namespace

StencilOutput assemble_stencil_serial(const StencilInput& input) {
  const std::size_t rows = input.states->size();
  const std::size_t width = detail::row_width(input);
  StencilOutput out;
  out.csr.rows = rows;
  out.csr.outer.resize(rows + 1);
  out.csr.inner.resize(rows * width);
  out.csr.values.resize(rows * width);
  Configuration eta(*input.lattice, std::vector<double>(input.states->sites()));
  std::vector<std::pair<int, double>> entries;
  for (std::size_t r = 0; r < rows; ++r) {
    if (!detail::assemble_row(input, r, eta, entries)) ++out.negative_rows;
    out.csr.outer[r] = static_cast<int>(r * width);
    for (std::size_t k = 0; k < width; ++k) {
      out.csr.inner[r * width + k] = entries[k].first;
      out.csr.values[r * width + k] = entries[k].second;
    }
  }
  out.csr.outer[rows] = static_cast<int>(rows * width);
  return out;
}

StencilOutput assemble_stencil(const StencilInput& input, Execution execution) {
  return execution == Execution::Serial ? assemble_stencil_serial(input)
                                        : assemble_stencil_parallel(input);
}

void spmv_serial(const SparseMatrix& m, std::span<const double> x, std::span<double> y) {
  for (Eigen::Index r = 0; r < m.outerSize(); ++r) {
    double acc = 0.0;
    for (SparseMatrix::InnerIterator it(m, r); it; ++it) acc += it.value() * x[it.col()];
    y[r] = acc;
  }
}

PathOutput euler_maruyama_serial(const PathInput& input, std::size_t paths) {
  PathOutput out;
  out.paths = paths;
  out.sites = input.lattice->site_count();
  out.frames = frame_count(input);
  out.angles.resize(out.frames * paths * out.sites);
  Configuration eta(*input.lattice, std::vector<double>(out.sites));
  std::vector<double> drift(out.sites), sigma(out.sites);
  for (std::size_t p = 0; p < paths; ++p)
    detail::simulate_path(input, p, out.frames, paths, out.angles, eta, drift, sigma);
  return out;
}

}  // namespace torusdiff::kernels
