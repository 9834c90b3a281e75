#include <cmath>
#include <random>
#include <set>

#include "support.hpp"

#include "torusdiff/model.hpp"

using namespace torusdiff;

using testing_support::kind_of;

TEST_CASE("Lattice: Sites are lexicographic") {
  Lattice lat(2, 1);
  REQUIRE_EQ(lat.site_count(), 9u);
  CHECK_EQ(lat.coords(0)[0], -1);
  CHECK_EQ(lat.coords(0)[1], -1);
  CHECK_EQ(lat.coords(1)[1], 0);
  CHECK_EQ(*lat.origin(), 4u);
}

TEST_CASE("Lattice: Frozen leaves box periodic wraps") {
  Lattice frozen(1, 1, Closure::Frozen);
  Lattice periodic(1, 1, Closure::Periodic);
  const int out[] = {2};
  CHECK_FALSE(frozen.site_at(out).has_value());
  CHECK_EQ(*periodic.site_at(out), 0u);
  CHECK_EQ(periodic.distance(0, 2), 1);
  CHECK_EQ(frozen.distance(0, 2), 2);
}

TEST_CASE("Grid: Rejects odd or tiny meshes") {
  CHECK_EQ(kind_of([] { Grid g(5); }), ErrorKind::InvalidArgument);
  CHECK_EQ(kind_of([] { Grid g(2); }), ErrorKind::InvalidArgument);
  Grid g(8);
  CHECK_NEAR(g.mesh(), kTwoPi / 8, 1e-15);
  CHECK_NEAR(g.angle(2), kTwoPi / 4, 1e-15);
}

TEST_CASE("StateSpace: Encode decode is a bijection") {
  Lattice lat(1, 1);
  Grid g(6);
  StateSpace states(lat, g);
  REQUIRE_EQ(states.size(), 216u);
  std::set<std::size_t> seen;
  std::vector<int> digits(3);
  for (std::size_t x = 0; x < states.size(); ++x) {
    states.decode(x, digits);
    for (int d : digits) {
      CHECK_GE(d, 0);
      CHECK_LT(d, 6);
    }
    CHECK_EQ(states.encode(digits), x);
    seen.insert(states.encode(digits));
  }
  CHECK_EQ(seen.size(), states.size());
}

TEST_CASE("StateSpace: Site zero is most significant") {
  StateSpace states(Lattice(1, 1), Grid(4));
  const int digits[] = {1, 0, 0};
  CHECK_EQ(states.encode(digits), 16u);
  CHECK_EQ(states.stride(0), 16u);
  CHECK_EQ(states.stride(2), 1u);
}

TEST_CASE("StateSpace: Shift wraps around the circle") {
  StateSpace states(Lattice(1, 0), Grid(8));
  CHECK_EQ(states.shift(7, 0, 1), 0u);
  CHECK_EQ(states.shift(0, 0, -1), 7u);
}

TEST_CASE("StateSpace: Cap is enforced") {
  CHECK_EQ(kind_of([] { StateSpace s(Lattice(1, 3), Grid(32), 1000); }), ErrorKind::StateSpaceTooLarge);
}

TEST_CASE("Hamiltonian: Drift is the gradient of h") {
  for (Closure closure : {Closure::Frozen, Closure::Periodic}) {
    Lattice lat(1, 1, closure);
    Hamiltonian h(lat, {onsite_cosine(1, 0.7), pair_cosine(1, 0, 0.4)});
    std::mt19937_64 engine(5);
    std::uniform_real_distribution<double> angle(0.0, kTwoPi);
    for (int trial = 0; trial < 20; ++trial) {
      std::vector<double> x(3);
      for (double& v : x) v = angle(engine);
      for (std::size_t i = 0; i < 3; ++i) {
        auto up = x, down = x;
        up[i] += 1e-6;
        down[i] -= 1e-6;
        const double fd = (h.value(Configuration(lat, up)) - h.value(Configuration(lat, down))) / 2e-6;
        CHECK_NEAR(h.partial(Configuration(lat, x), i), fd, 1e-8);
      }
    }
  }
}

TEST_CASE("Hamiltonian: Frozen boundary includes outside anchors") {
  Lattice lat(1, 0, Closure::Frozen);
  Hamiltonian h(lat, {pair_cosine(1, 0, 1.0)});
  // Anchors -1 and 0 both touch the single site; outside angles are 0.
  const double x = 0.9;
  CHECK_NEAR(h.value(Configuration(lat, {x})), 2.0 * std::cos(x), 1e-15);
}

TEST_CASE("Hamiltonian: Periodic single site pair term is constant") {
  Lattice lat(1, 0, Closure::Periodic);
  Hamiltonian h(lat, {pair_cosine(1, 0, 1.0)});
  CHECK_NEAR(h.value(Configuration(lat, {1.3})), 1.0, 1e-15);
  CHECK_NEAR(h.partial(Configuration(lat, {1.3}), 0), 0.0, 1e-15);
}

TEST_CASE("Model: Ibm coefficients") {
  auto spec = build_ibm_model({onsite_cosine(1, 0.5)}, Lattice(1, 0), Grid(16));
  Configuration eta(spec.lattice, {kTwoPi / 4});
  CHECK_NEAR(spec.coefficients.diffusion(eta, 0), 2.0, 1e-15);
  CHECK_NEAR(spec.coefficients.drift(eta, 0), -0.5, 1e-15);
  CHECK_NEAR(spec.coefficients.b_max, 0.5, 1e-15);
  CHECK_NEAR(second_order_floor(spec.coefficients, spec.lattice, spec.grid), 1.0, 1e-15);
}

TEST_CASE("Model: Ellipticity violation is reported") {
  auto spec = build_custom_model({1.0, 1.0, 0, 0, 0}, Lattice(1, 0), Grid(8));
  CHECK_EQ(kind_of([&] { compute_ellipticity_bound(spec.coefficients, spec.lattice, spec.grid); }),
            ErrorKind::NotElliptic);
}

TEST_CASE("Model: Perturbation constant") {
  Lattice lat(1, 1);
  Grid g(8);
  CHECK_NEAR(compute_C0(origin_derivative(lat, 2.0), lat, g), 2.0, 1e-15);
  CHECK_NEAR(compute_C0(uniform_derivative(lat, 1.0), lat, g), std::sqrt(3.0), 1e-15);
  CHECK_NEAR(compute_C0(origin_sine(lat, 1.0), lat, g), 1.0, 1e-15);
}

TEST_CASE("Model: Perturbed coefficients add to drift") {
  auto spec = build_ibm_model({onsite_cosine(1, 0.5)}, Lattice(1, 0), Grid(8));
  auto c = origin_derivative(spec.lattice);
  auto field = perturbed_coefficients(spec.coefficients, c, 0.25);
  Configuration eta(spec.lattice, {1.0});
  CHECK_NEAR(field.drift(eta, 0), spec.coefficients.drift(eta, 0) + 0.25, 1e-15);
  CHECK_NEAR(field.b_max, spec.coefficients.b_max + 0.25, 1e-15);
}
