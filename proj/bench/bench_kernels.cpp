#include <vector>

#include <benchmark/benchmark.h>

#include "torusdiff/kernels.hpp"
#include "torusdiff/operators.hpp"

using namespace torusdiff;

namespace {

DiffusionSpec chain(int m) {
  return build_ibm_model({pair_cosine(1, 0, 0.5), onsite_cosine(1, 0.5)}, Lattice(1, 2), Grid(m));
}

void assembly(benchmark::State& state, Execution execution) {
  const auto spec = chain(static_cast<int>(state.range(0)));
  const auto states = spec.states();
  kernels::StencilInput in{&spec.lattice, &states, spec.grid.mesh(), &spec.coefficients.diffusion,
                           &spec.coefficients.drift};
  for (auto _ : state) benchmark::DoNotOptimize(kernels::assemble_stencil(in, execution));
  state.counters["states"] = static_cast<double>(states.size());
}

void spmv(benchmark::State& state, Execution execution) {
  const auto l = assemble_generator(chain(static_cast<int>(state.range(0))));
  const auto n = static_cast<std::size_t>(l.size());
  std::vector<double> x(n, 1.0), y(n);
  for (std::size_t i = 0; i < n; ++i) x[i] = static_cast<double>(i % 7);
  for (auto _ : state) {
    if (execution == Execution::Serial)
      kernels::spmv_serial(l.matrix(), x, y);
    else
      kernels::spmv_parallel(l.matrix(), x, y);
    benchmark::DoNotOptimize(y.data());
  }
  state.counters["states"] = static_cast<double>(n);
}

void paths(benchmark::State& state, Execution execution) {
  const auto spec = chain(8);
  const std::vector<double> start(spec.lattice.site_count(), 0.5);
  kernels::PathInput in;
  in.lattice = &spec.lattice;
  in.diffusion = &spec.coefficients.diffusion;
  in.drift = &spec.coefficients.drift;
  in.start = start;
  in.dt = 1e-3;
  in.steps = 100;
  in.seed = 1;
  const auto count = static_cast<std::size_t>(state.range(0));
  for (auto _ : state) {
    benchmark::DoNotOptimize(execution == Execution::Serial ? kernels::euler_maruyama_serial(in, count)
                                                            : kernels::euler_maruyama_parallel(in, count));
  }
  state.counters["paths"] = static_cast<double>(count);
}

}  // namespace

BENCHMARK_CAPTURE(assembly, serial, Execution::Serial)->Arg(8)->Arg(12)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(assembly, parallel, Execution::Parallel)->Arg(8)->Arg(12)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(spmv, serial, Execution::Serial)->Arg(8)->Arg(12)->Unit(benchmark::kMicrosecond);
BENCHMARK_CAPTURE(spmv, parallel, Execution::Parallel)->Arg(8)->Arg(12)->Unit(benchmark::kMicrosecond);
BENCHMARK_CAPTURE(paths, serial, Execution::Serial)->Arg(1000)->Arg(10000)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(paths, parallel, Execution::Parallel)->Arg(1000)->Arg(10000)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
