#pragma once

// Lattice geometry, grid discretization of the circle, coefficient fields and
// the built-in interacting Brownian motions model.

#include <cstddef>
#include <functional>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace torusdiff {

inline constexpr std::size_t kDefaultStateCap = 10'000'000;
inline constexpr std::size_t kDenseStateCap = 5'000;
inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

/// How coordinates outside the box are evaluated. Frozen pins them at angle 0,
/// Periodic wraps the box onto a discrete torus.
enum class Closure { Frozen, Periodic };

std::string to_string(Closure closure);

/// The box [-n, n]^d of Z^d with sites numbered lexicographically in their
/// coordinates (first axis slowest).
class Lattice {
 public:
  Lattice(int dimension, int half_width, Closure closure = Closure::Frozen);

  int dimension() const noexcept { return dimension_; }
  int half_width() const noexcept { return half_width_; }
  int width() const noexcept { return 2 * half_width_ + 1; }
  Closure closure() const noexcept { return closure_; }
  std::size_t site_count() const noexcept { return site_count_; }

  std::span<const int> coords(std::size_t site) const;
  /// Site index of a lattice point; Periodic wraps, Frozen returns nullopt
  /// outside the box.
  std::optional<std::size_t> site_at(std::span<const int> coords) const;
  std::optional<std::size_t> shifted(std::size_t site, std::span<const int> offset) const;
  std::optional<std::size_t> origin() const;
  /// Sup-norm distance (torus distance under Periodic closure).
  int distance(std::size_t i, std::size_t j) const;
  /// Box sites within `range` of `site`, in increasing order.
  std::vector<std::size_t> ball(std::size_t site, int range) const;

 private:
  int dimension_;
  int half_width_;
  Closure closure_;
  std::size_t site_count_;
  std::vector<int> coords_;
};

/// M equispaced points on the circle, angles 2 pi k / M.
class Grid {
 public:
  explicit Grid(int points);

  int points() const noexcept { return points_; }
  double mesh() const noexcept { return kTwoPi / points_; }
  double angle(int k) const noexcept { return kTwoPi * k / points_; }

 private:
  int points_;
};

/// Angles of the box sites together with the closure rule for everything
/// outside the box.
class Configuration {
 public:
  Configuration(const Lattice& lattice, std::vector<double> angles);

  const Lattice& lattice() const noexcept { return *lattice_; }
  double angle(std::size_t site) const { return angles_[site]; }
  double angle(std::size_t site, std::span<const int> offset) const;
  /// Neighbor along one axis; steps may leave the box.
  double neighbor(std::size_t site, int axis, int step) const;
  std::span<const double> angles() const noexcept { return angles_; }
  std::vector<double>& mutable_angles() noexcept { return angles_; }

 private:
  const Lattice* lattice_;
  std::vector<double> angles_;
};

/// Encodes the discrete state space grid^{box}. Digit s is the circle index
/// of site s; site 0 is the most significant digit.
class StateSpace {
 public:
  StateSpace(const Lattice& lattice, const Grid& grid, std::size_t cap = kDefaultStateCap);

  std::size_t size() const noexcept { return size_; }
  std::size_t sites() const noexcept { return sites_; }
  int points() const noexcept { return points_; }
  std::size_t stride(std::size_t site) const { return strides_[site]; }

  int digit(std::size_t index, std::size_t site) const;
  void decode(std::size_t index, std::span<int> digits) const;
  std::size_t encode(std::span<const int> digits) const;
  /// Index of the state with site `site` moved by `delta` grid steps (mod M).
  std::size_t shift(std::size_t index, std::size_t site, int delta) const;
  void angles(std::size_t index, std::span<double> out) const;

 private:
  std::size_t sites_;
  int points_;
  std::size_t size_;
  std::vector<std::size_t> strides_;
};

/// Throws StateSpaceTooLarge when M^{|box|} exceeds `cap`.
StateSpace enumerate_states(const Lattice& lattice, const Grid& grid,
                            std::size_t cap = kDefaultStateCap);

using SiteFunction = std::function<double(const Configuration&, std::size_t site)>;

/// Diffusion a_i and drift b_i of L = sum_i (a_i/2 d_i^2 + b_i d_i).
struct CoefficientField {
  int range = 0;
  SiteFunction diffusion;
  SiteFunction drift;
  double a_min = 0.0;
  double a_max = 0.0;
  double b_max = 0.0;
};

/// Coefficients c_i of the first order operator A = sum_i c_i d_i. Sites not
/// listed in `active_sites` have c_i identically zero.
struct PerturbationField {
  int range = 0;
  SiteFunction coefficient;
  std::vector<std::size_t> active_sites;
  double c_max = 0.0;
  std::string description;
};

/// One translate-invariant local term Phi_j of a Hamiltonian. `support` holds
/// offsets relative to the anchor site j; `partial(x, k)` is the derivative
/// with respect to the k-th support coordinate.
struct LocalPotential {
  std::vector<std::vector<int>> support;
  std::function<double(std::span<const double>)> value;
  std::function<double(std::span<const double>, std::size_t)> partial;
  std::string description;
};

LocalPotential onsite_cosine(int dimension, double beta);
/// beta cos(eta_i - eta_{i + e_axis}).
LocalPotential pair_cosine(int dimension, int axis, double beta);

/// H(eta) = sum_j Phi_j(eta). Under Frozen closure every anchor whose support
/// meets the box contributes (outside coordinates pinned at 0); under
/// Periodic closure the anchors are the box sites.
class Hamiltonian {
 public:
  Hamiltonian(const Lattice& lattice, std::vector<LocalPotential> potentials);

  double value(const Configuration& eta) const;
  double partial(const Configuration& eta, std::size_t site) const;
  int range() const noexcept { return range_; }
  const std::vector<LocalPotential>& potentials() const noexcept { return potentials_; }

 private:
  struct Term {
    std::size_t potential;
    std::vector<std::optional<std::size_t>> sites;
  };
  struct Incidence {
    std::size_t term;
    std::size_t slot;
  };
  double term_value(const Term& term, const Configuration& eta, std::vector<double>& buffer) const;

  std::vector<LocalPotential> potentials_;
  std::vector<Term> terms_;
  std::vector<std::vector<Incidence>> incidence_;
  int range_ = 0;
};

struct DiffusionSpec {
  Lattice lattice;
  Grid grid;
  CoefficientField coefficients;
  std::optional<Hamiltonian> hamiltonian;
  std::optional<PerturbationField> perturbation;
  std::string label;
  std::size_t state_cap = kDefaultStateCap;

  StateSpace states() const { return StateSpace(lattice, grid, state_cap); }
};

/// Min over sites and grid states of a_i; throws NotElliptic if <= 0.
double compute_ellipticity_bound(const CoefficientField& field, const Lattice& lattice,
                                 const Grid& grid);
/// The ellipticity constant of the generator written as sum_i (a_i d_i^2 + ...),
/// i.e. min a_i / 2. This is the constant entering the Dirichlet-form, decay
/// and critical-radius formulas.
double second_order_floor(const CoefficientField& field, const Lattice& lattice, const Grid& grid);
/// sqrt of max over grid states of sum_i c_i^2, enumerated over the local
/// configurations the active coefficients can see.
double compute_C0(const PerturbationField& field, const Lattice& lattice, const Grid& grid,
                  std::size_t cap = kDefaultStateCap);
/// max over sites and grid states of |value(eta, i)|, by local enumeration.
double local_sup(const SiteFunction& fn, int range, const Lattice& lattice, const Grid& grid);

DiffusionSpec build_ibm_model(std::vector<LocalPotential> potentials, const Lattice& lattice,
                              const Grid& grid);

/// Non-reversible family: a_i = a0 + a1 cos(eta_i),
/// b_i = b0 + b1 sin(eta_i) + coupling sin(eta_{i+1} - eta_i) (first axis).
struct CustomCoefficients {
  double a0 = 2.0;
  double a1 = 0.0;
  double b0 = 0.0;
  double b1 = 0.0;
  double coupling = 0.0;
};
DiffusionSpec build_custom_model(const CustomCoefficients& params, const Lattice& lattice,
                                 const Grid& grid);

/// c at the origin only (A = amplitude * d_0).
PerturbationField origin_derivative(const Lattice& lattice, double amplitude = 1.0);
/// c_i = amplitude at every box site.
PerturbationField uniform_derivative(const Lattice& lattice, double amplitude = 1.0);
/// c_0 = amplitude * sin(eta_0).
PerturbationField origin_sine(const Lattice& lattice, double amplitude = 1.0);

/// Same coefficients with drift b_i + eps * c_i.
CoefficientField perturbed_coefficients(const CoefficientField& base, const PerturbationField& c,
                                        double eps);

}  // namespace torusdiff
