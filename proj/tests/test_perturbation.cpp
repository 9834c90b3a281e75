#include <random>

#include "oracles.hpp"
#include "support.hpp"
#include "torusdiff/operators.hpp"
#include "torusdiff/perturbation.hpp"
#include "torusdiff/stationary.hpp"

using namespace torusdiff;
using testing_support::kind_of;

namespace {

struct Fixture {
  DiffusionSpec spec;
  PerturbationField c;
  OperatorMatrix l0;
  OperatorMatrix a;
  Measure nu;
};

Fixture single_site(int m) {
  auto spec = build_ibm_model({onsite_cosine(1, 0.5)}, Lattice(1, 0), Grid(m));
  auto c = origin_derivative(spec.lattice);
  auto l0 = assemble_generator(spec);
  auto a = assemble_first_order(c, spec.lattice, spec.grid);
  auto nu = stationary_measure(l0);
  return {spec, c, l0, a, nu};
}

Fixture chain(int m) {
  auto spec = build_ibm_model({pair_cosine(1, 0, 0.5)}, Lattice(1, 1), Grid(m));
  auto c = origin_derivative(spec.lattice);
  auto l0 = assemble_generator(spec);
  auto a = assemble_first_order(c, spec.lattice, spec.grid);
  auto nu = stationary_measure(l0);
  return {spec, c, l0, a, nu};
}

/// Density correction rho with L0^T rho = -A^T nu and sum rho = 0, by a dense
/// minimum-norm solve of the stacked system.
Vector first_order_density(const Fixture& f) {
  const Eigen::Index n = f.l0.size();
  Eigen::MatrixXd k(n + 1, n);
  k.topRows(n) = f.l0.dense().transpose();
  k.row(n).setOnes();
  Eigen::VectorXd rhs(n + 1);
  rhs.head(n) = -(f.a.dense().transpose() * f.nu.weights);
  rhs[n] = 0.0;
  return k.completeOrthogonalDecomposition().solve(rhs);
}

}  // namespace

TEST_CASE("critical epsilon") {
  CHECK_NEAR(epsilon_c(1.0, 2.0, 4.0), 0.25, 1e-15);
  CHECK_EQ(kind_of([] { epsilon_c(0.0, 1.0, 1.0); }), ErrorKind::NonPositiveConstant);
  CHECK_EQ(kind_of([] { epsilon_c(1.0, 1.0, -1.0); }), ErrorKind::NonPositiveConstant);
}

TEST_CASE("recurrence residuals and means vanish") {
  for (const auto& f : {single_site(16), chain(6)}) {
    auto series = rs_coefficients(f.l0, f.a, f.nu, 6);
    REQUIRE_EQ(series.order(), 6);
    CHECK_NEAR(series.norms[0], 1.0, 1e-14);
    for (double r : series.residuals) CHECK(r <= 1e-9);
    CHECK_NEAR(series.means[0], 1.0, 1e-14);
    for (std::size_t k = 1; k < series.means.size(); ++k) CHECK(std::abs(series.means[k]) <= 1e-12);
    for (double s : series.solvability) CHECK(std::abs(s) <= 1e-10);
  }
}

TEST_CASE("bordered and grounded deflation agree") {
  auto f = chain(6);
  auto b = rs_coefficients(f.l0, f.a, f.nu, 4, DeflationStrategy::Bordered);
  auto g = rs_coefficients(f.l0, f.a, f.nu, 4, DeflationStrategy::Grounded);
  for (int k = 0; k <= 4; ++k) {
    const Vector diff = b.coefficients[k] - g.coefficients[k];
    CHECK(nu_norm(f.nu, diff) <= 1e-9 * std::max(1.0, b.norms[k]));
  }
}

TEST_CASE("first coefficient matches an independent density solve") {
  auto f = single_site(16);
  auto series = rs_coefficients(f.l0, f.a, f.nu, 1);
  const Vector want = first_order_density(f).cwiseQuotient(f.nu.weights);
  const Vector diff = series.coefficients[1] - want;
  CHECK(nu_norm(f.nu, diff) <= 1e-9 * nu_norm(f.nu, want));
}

TEST_CASE("direct perturbed measure is the null vector of L0 + eps A") {
  auto f = chain(6);
  const double eps = 0.05;
  auto direct = direct_perturbed_measure(f.spec, f.c, f.nu, eps);
  auto perturbed = f.spec;
  perturbed.coefficients = perturbed_coefficients(f.spec.coefficients, f.c, eps);
  const Vector want = oracle::left_null_vector(oracle::generator(perturbed));
  CHECK(total_variation(direct.measure.weights, want) <= 1e-10);
  CHECK((direct.g - direct.measure.weights.cwiseQuotient(f.nu.weights)).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("series converges to the direct density") {
  auto f = single_site(16);
  auto series = rs_coefficients(f.l0, f.a, f.nu, 6);
  const double eps = 0.05;
  auto direct = direct_perturbed_measure(f.spec, f.c, f.nu, eps);
  double previous = std::numeric_limits<double>::infinity();
  for (int k = 0; k <= 6; ++k) {
    auto d = series_density(series, f.nu, eps, k);
    const double err = nu_norm(f.nu, Vector(d.g - direct.g));
    CHECK(err < previous);
    previous = err;
    CHECK_NEAR(nu_mean(f.nu, d.g), 1.0, 1e-12);
  }
  CHECK(previous < 1e-9);
}

TEST_CASE("empirical radius of a synthetic geometric series") {
  SeriesResult s;
  for (int k = 0; k <= 6; ++k) {
    s.coefficients.push_back(Vector::Zero(1));
    s.norms.push_back(3.0 * std::pow(0.5, k));
  }
  auto fit = empirical_radius(s, 2);
  CHECK_NEAR(fit.growth, 0.5, 1e-12);
  CHECK_NEAR(fit.radius, 2.0, 1e-11);
  CHECK_NEAR(fit.r_squared, 1.0, 1e-12);
  CHECK_EQ(fit.k_max, 6);
}

TEST_CASE("solvability violation is detected") {
  auto f = single_site(8);
  SparseMatrix d(f.l0.size(), f.l0.size());
  for (Eigen::Index i = 0; i < d.rows(); ++i) d.insert(i, i) = 1.0 + 0.1 * static_cast<double>(i);
  OperatorMatrix diag(d, OperatorTag::FirstOrder, "diagonal", f.l0.mesh());
  CHECK_EQ(kind_of([&] { rs_coefficients(f.l0, diag, f.nu, 2); }), ErrorKind::SolvabilityViolated);
}

TEST_CASE("unperturbed projector is one times nu transpose") {
  auto f = chain(6);
  auto split = symmetrize(f.l0, f.nu);
  auto gap = spectral_gap(split.symmetric, f.nu).gap;
  auto p = riesz_projector(f.l0, gap / 2);
  const DenseMatrix want = Vector::Ones(f.l0.size()) * f.nu.weights.transpose();
  CHECK((p.projector - want).cwiseAbs().maxCoeff() <= 1e-8);
  CHECK(p.idempotency_defect <= 1e-8);
  CHECK_EQ(p.rank, 1);
  CHECK(p.quadrature_change <= 1e-8);
}

TEST_CASE("perturbed projector density matches the direct solve") {
  auto f = single_site(16);
  const double eps = 0.1;
  auto leps = assemble_perturbed_generator(f.spec, f.c, eps);
  auto gap = spectral_gap(symmetrize(f.l0, f.nu).symmetric, f.nu).gap;
  auto p = riesz_projector(leps, gap / 2);
  auto direct = direct_perturbed_measure(f.spec, f.c, f.nu, eps);
  const Vector g = adjoint_projector_density(p, f.nu);
  CHECK((g - direct.g).cwiseAbs().maxCoeff() <= 1e-6);
}

TEST_CASE("contour through the spectrum is rejected") {
  auto f = single_site(8);
  auto low = spectral_gap(symmetrize(f.l0, f.nu).symmetric, f.nu).low_spectrum;
  REQUIRE(low.size() >= 2);
  // Radius between the gap eigenvalues so two eigenvalues are enclosed.
  const double r = 0.5 * (low[1] + low[2]) + 0.5 * std::abs(low[2] - low[1]) + 0.5;
  CHECK_EQ(kind_of([&] { riesz_projector(f.l0, r); }), ErrorKind::ContourHitsSpectrum);
}

TEST_CASE("relative boundedness holds on random trigonometric functions") {
  auto f = single_site(16);
  std::mt19937_64 engine(1);
  std::vector<Vector> samples;
  for (int i = 0; i < 100; ++i) samples.push_back(random_trigonometric(f.spec.states(), 3, engine));
  const double a = second_order_floor(f.spec.coefficients, f.spec.lattice, f.spec.grid);
  const double c0 = compute_C0(f.c, f.spec.lattice, f.spec.grid);
  auto report = relative_bound_check(f.l0, f.a, f.nu, c0, a, samples, {0.1, 1.0, 10.0});
  CHECK_EQ(report.trials, 100);
  CHECK_EQ(report.violations, 0);
  CHECK(report.worst_slack >= 0.0);
}

TEST_CASE("random trigonometric functions respect the degree") {
  auto f = single_site(16);
  std::mt19937_64 engine(2);
  const Vector v = random_trigonometric(f.spec.states(), 2, engine);
  Eigen::VectorXcd spectrum(16);
  for (int k = 0; k < 16; ++k) {
    std::complex<double> s = 0;
    for (int x = 0; x < 16; ++x) s += v[x] * std::polar(1.0, -kTwoPi * k * x / 16);
    spectrum[k] = s;
  }
  for (int k = 3; k <= 13; ++k) CHECK(std::abs(spectrum[k]) <= 1e-12);
}
