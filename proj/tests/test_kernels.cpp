#include <random>

#include "oracles.hpp"
#include "support.hpp"
#include "torusdiff/kernels.hpp"
#include "torusdiff/operators.hpp"

using namespace torusdiff;
using testing_support::kind_of;

namespace {

DiffusionSpec ibm_chain(int m) {
  Lattice lat(1, 1, Closure::Frozen);
  return build_ibm_model({pair_cosine(1, 0, 0.5)}, lat, Grid(m));
}

DiffusionSpec drifted(int m) {
  CustomCoefficients p;
  p.a1 = 0.5;
  p.b0 = 0.3;
  p.b1 = 0.2;
  p.coupling = 0.4;
  return build_custom_model(p, Lattice(1, 1, Closure::Periodic), Grid(m));
}

void check_against_oracle(const DiffusionSpec& spec) {
  const DenseMatrix got = assemble_generator(spec).dense();
  const Eigen::MatrixXd want = oracle::generator(spec);
  REQUIRE_EQ(got.rows(), want.rows());
  const double scale = want.cwiseAbs().maxCoeff();
  CHECK((got - want).cwiseAbs().maxCoeff() <= 1e-13 * scale);
}

}  // namespace

TEST_CASE("assembly matches direct stencil formula") {
  SUBCASE("single site") { check_against_oracle(build_ibm_model({onsite_cosine(1, 0.5)}, Lattice(1, 0), Grid(8))); }
  SUBCASE("frozen chain") { check_against_oracle(ibm_chain(6)); }
  SUBCASE("periodic non-reversible chain") { check_against_oracle(drifted(6)); }
}

TEST_CASE("generator rows sum to exactly zero") {
  for (const auto& spec : {ibm_chain(8), drifted(8)}) {
    const auto l = assemble_generator(spec);
    const Vector sums = l.row_sums();
    CHECK_EQ(sums.cwiseAbs().maxCoeff(), 0.0);
  }
}

TEST_CASE("coarse mesh with strong drift is rejected") {
  CustomCoefficients p;
  p.a0 = 0.1;
  p.b0 = 5.0;
  auto spec = build_custom_model(p, Lattice(1, 0), Grid(8));
  CHECK_EQ(kind_of([&] { assemble_generator(spec); }), ErrorKind::MeshTooCoarse);
}

TEST_CASE("serial and parallel stencil assembly are identical") {
  auto spec = drifted(10);
  auto states = spec.states();
  kernels::StencilInput in{&spec.lattice, &states, spec.grid.mesh(), &spec.coefficients.diffusion,
                           &spec.coefficients.drift};
  auto s = kernels::assemble_stencil_serial(in);
  auto p = kernels::assemble_stencil_parallel(in);
  CHECK(s.csr.outer == p.csr.outer);
  CHECK(s.csr.inner == p.csr.inner);
  CHECK(s.csr.values == p.csr.values);
  CHECK_EQ(s.negative_rows, p.negative_rows);
}

TEST_CASE("serial and parallel spmv are identical") {
  auto l = assemble_generator(drifted(12));
  std::mt19937_64 engine(3);
  std::normal_distribution<double> normal;
  Vector x(l.size());
  for (auto& v : x) v = normal(engine);
  Vector ys(l.size()), yp(l.size());
  const auto n = static_cast<std::size_t>(l.size());
  kernels::spmv_serial(l.matrix(), {x.data(), n}, {ys.data(), n});
  kernels::spmv_parallel(l.matrix(), {x.data(), n}, {yp.data(), n});
  CHECK((ys.array() == yp.array()).all());
  CHECK((ys - l.matrix() * x).cwiseAbs().maxCoeff() <= 1e-12 * ys.cwiseAbs().maxCoeff());
}

TEST_CASE("serial and parallel Euler-Maruyama are identical") {
  auto spec = ibm_chain(8);
  std::vector<double> start{0.3, 1.0, 2.0};
  kernels::PathInput in;
  in.lattice = &spec.lattice;
  in.diffusion = &spec.coefficients.diffusion;
  in.drift = &spec.coefficients.drift;
  in.start = start;
  in.dt = 1e-3;
  in.steps = 200;
  in.seed = 42;
  in.record_stride = 50;
  auto s = kernels::euler_maruyama_serial(in, 257);
  auto p = kernels::euler_maruyama_parallel(in, 257);
  CHECK_EQ(s.frames, p.frames);
  CHECK(s.angles == p.angles);
}

TEST_CASE("first-order operator is the centered difference") {
  Lattice lat(1, 0);
  Grid g(8);
  auto a = assemble_first_order(origin_derivative(lat, 1.0), lat, g).dense();
  const double h = g.mesh();
  for (int x = 0; x < 8; ++x) {
    CHECK_NEAR(a(x, (x + 1) % 8), 1.0 / (2 * h), 1e-14);
    CHECK_NEAR(a(x, (x + 7) % 8), -1.0 / (2 * h), 1e-14);
    CHECK_NEAR(a(x, x), 0.0, 0.0);
  }
}
