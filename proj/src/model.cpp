#include "torusdiff/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "torusdiff/errors.hpp"

namespace torusdiff {

std::string to_string(Closure closure) {
  return closure == Closure::Frozen ? "frozen" : "periodic";
}

Lattice::Lattice(int dimension, int half_width, Closure closure)
    : dimension_(dimension), half_width_(half_width), closure_(closure), site_count_(1) {
  if (dimension < 1) fail(ErrorKind::InvalidArgument, "lattice dimension must be positive");
  if (half_width < 0) fail(ErrorKind::InvalidArgument, "lattice half width must be nonnegative");
  for (int k = 0; k < dimension; ++k) site_count_ *= static_cast<std::size_t>(width());
  coords_.resize(site_count_ * dimension_);
  for (std::size_t s = 0; s < site_count_; ++s) {
    std::size_t rest = s;
    for (int k = dimension_ - 1; k >= 0; --k) {
      coords_[s * dimension_ + k] = static_cast<int>(rest % width()) - half_width_;
      rest /= width();
    }
  }
}

std::span<const int> Lattice::coords(std::size_t site) const {
  return {coords_.data() + site * dimension_, static_cast<std::size_t>(dimension_)};
}

std::optional<std::size_t> Lattice::site_at(std::span<const int> coords) const {
  std::size_t index = 0;
  for (int k = 0; k < dimension_; ++k) {
    int c = coords[k];
    if (c < -half_width_ || c > half_width_) {
      if (closure_ == Closure::Frozen) return std::nullopt;
      c = ((c + half_width_) % width() + width()) % width() - half_width_;
    }
    index = index * width() + static_cast<std::size_t>(c + half_width_);
  }
  return index;
}

std::optional<std::size_t> Lattice::shifted(std::size_t site, std::span<const int> offset) const {
  int buffer[8];
  std::vector<int> heap;
  int* target = buffer;
  if (dimension_ > 8) {
    heap.resize(dimension_);
    target = heap.data();
  }
  auto base = coords(site);
  for (int k = 0; k < dimension_; ++k) target[k] = base[k] + offset[k];
  return site_at({target, static_cast<std::size_t>(dimension_)});
}

std::optional<std::size_t> Lattice::origin() const {
  std::vector<int> zero(dimension_, 0);
  return site_at(zero);
}

int Lattice::distance(std::size_t i, std::size_t j) const {
  auto a = coords(i);
  auto b = coords(j);
  int best = 0;
  for (int k = 0; k < dimension_; ++k) {
    int delta = std::abs(a[k] - b[k]);
    if (closure_ == Closure::Periodic) delta = std::min(delta, width() - delta);
    best = std::max(best, delta);
  }
  return best;
}

std::vector<std::size_t> Lattice::ball(std::size_t site, int range) const {
  std::vector<std::size_t> out;
  for (std::size_t j = 0; j < site_count_; ++j)
    if (distance(site, j) <= range) out.push_back(j);
  return out;
}

Grid::Grid(int points) : points_(points) {
  if (points < 4 || points % 2 != 0)
    fail(ErrorKind::InvalidArgument, "points per circle must be an even integer >= 4");
}

Configuration::Configuration(const Lattice& lattice, std::vector<double> angles)
    : lattice_(&lattice), angles_(std::move(angles)) {
  if (angles_.size() != lattice.site_count())
    fail(ErrorKind::InvalidArgument, "configuration size does not match lattice");
}

double Configuration::angle(std::size_t site, std::span<const int> offset) const {
  auto target = lattice_->shifted(site, offset);
  return target ? angles_[*target] : 0.0;
}

double Configuration::neighbor(std::size_t site, int axis, int step) const {
  int offset[8] = {};
  offset[axis] = step;
  return angle(site, {offset, static_cast<std::size_t>(lattice_->dimension())});
}

StateSpace::StateSpace(const Lattice& lattice, const Grid& grid, std::size_t cap)
    : sites_(lattice.site_count()), points_(grid.points()), size_(1), strides_(sites_) {
  const auto m = static_cast<std::size_t>(points_);
  for (std::size_t s = 0; s < sites_; ++s) {
    if (size_ > cap / m) {
      std::ostringstream msg;
      msg << points_ << "^" << sites_ << " = " << std::pow(double(points_), double(sites_))
          << " states exceeds cap " << cap;
      fail(ErrorKind::StateSpaceTooLarge, msg.str());
    }
    size_ *= m;
  }
  if (size_ > cap) fail(ErrorKind::StateSpaceTooLarge, "state count exceeds cap");
  std::size_t stride = 1;
  for (std::size_t s = sites_; s-- > 0;) {
    strides_[s] = stride;
    stride *= m;
  }
}

int StateSpace::digit(std::size_t index, std::size_t site) const {
  return static_cast<int>((index / strides_[site]) % static_cast<std::size_t>(points_));
}

void StateSpace::decode(std::size_t index, std::span<int> digits) const {
  const auto m = static_cast<std::size_t>(points_);
  for (std::size_t s = sites_; s-- > 0;) {
    digits[s] = static_cast<int>(index % m);
    index /= m;
  }
}

std::size_t StateSpace::encode(std::span<const int> digits) const {
  std::size_t index = 0;
  for (std::size_t s = 0; s < sites_; ++s)
    index = index * static_cast<std::size_t>(points_) + static_cast<std::size_t>(digits[s]);
  return index;
}

std::size_t StateSpace::shift(std::size_t index, std::size_t site, int delta) const {
  const int d = digit(index, site);
  const int moved = ((d + delta) % points_ + points_) % points_;
  return index + (static_cast<std::ptrdiff_t>(moved) - d) * static_cast<std::ptrdiff_t>(strides_[site]);
}

void StateSpace::angles(std::size_t index, std::span<double> out) const {
  const auto m = static_cast<std::size_t>(points_);
  const double h = kTwoPi / points_;
  for (std::size_t s = sites_; s-- > 0;) {
    out[s] = h * static_cast<double>(index % m);
    index /= m;
  }
}

StateSpace enumerate_states(const Lattice& lattice, const Grid& grid, std::size_t cap) {
  return StateSpace(lattice, grid, cap);
}

namespace {

// Visits every grid assignment of the sites in `free_sites`, all other box
// sites held at angle 0.
template <class Visitor>
void for_each_local_configuration(const Lattice& lattice, const Grid& grid,
                                  const std::vector<std::size_t>& free_sites, std::size_t cap,
                                  Visitor&& visit) {
  std::size_t count = 1;
  for (std::size_t k = 0; k < free_sites.size(); ++k) {
    if (count > cap / static_cast<std::size_t>(grid.points()))
      fail(ErrorKind::StateSpaceTooLarge, "local configuration enumeration exceeds cap");
    count *= static_cast<std::size_t>(grid.points());
  }
  Configuration eta(lattice, std::vector<double>(lattice.site_count(), 0.0));
  std::vector<int> digits(free_sites.size(), 0);
  for (std::size_t c = 0; c < count; ++c) {
    std::size_t rest = c;
    for (std::size_t k = free_sites.size(); k-- > 0;) {
      digits[k] = static_cast<int>(rest % grid.points());
      rest /= grid.points();
      eta.mutable_angles()[free_sites[k]] = grid.angle(digits[k]);
    }
    visit(eta);
  }
}

}  // namespace

double compute_ellipticity_bound(const CoefficientField& field, const Lattice& lattice,
                                 const Grid& grid) {
  double lowest = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < lattice.site_count(); ++i) {
    for_each_local_configuration(lattice, grid, lattice.ball(i, field.range), kDefaultStateCap,
                                 [&](const Configuration& eta) {
                                   lowest = std::min(lowest, field.diffusion(eta, i));
                                 });
  }
  if (!(lowest > 0.0)) {
    std::ostringstream msg;
    msg << "min a_i over grid states is " << lowest;
    fail(ErrorKind::NotElliptic, msg.str());
  }
  return lowest;
}

double second_order_floor(const CoefficientField& field, const Lattice& lattice, const Grid& grid) {
  return 0.5 * compute_ellipticity_bound(field, lattice, grid);
}

double compute_C0(const PerturbationField& field, const Lattice& lattice, const Grid& grid,
                  std::size_t cap) {
  std::vector<std::size_t> seen;
  for (std::size_t i : field.active_sites) {
    auto b = lattice.ball(i, field.range);
    seen.insert(seen.end(), b.begin(), b.end());
  }
  std::sort(seen.begin(), seen.end());
  seen.erase(std::unique(seen.begin(), seen.end()), seen.end());
  double best = 0.0;
  for_each_local_configuration(lattice, grid, seen, cap, [&](const Configuration& eta) {
    double total = 0.0;
    for (std::size_t i : field.active_sites) {
      const double c = field.coefficient(eta, i);
      total += c * c;
    }
    best = std::max(best, total);
  });
  return std::sqrt(best);
}

double local_sup(const SiteFunction& fn, int range, const Lattice& lattice, const Grid& grid) {
  double best = 0.0;
  for (std::size_t i = 0; i < lattice.site_count(); ++i) {
    for_each_local_configuration(lattice, grid, lattice.ball(i, range), kDefaultStateCap,
                                 [&](const Configuration& eta) {
                                   best = std::max(best, std::abs(fn(eta, i)));
                                 });
  }
  return best;
}

LocalPotential onsite_cosine(int dimension, double beta) {
  LocalPotential p;
  p.support = {std::vector<int>(dimension, 0)};
  p.value = [beta](std::span<const double> x) { return beta * std::cos(x[0]); };
  p.partial = [beta](std::span<const double> x, std::size_t) { return -beta * std::sin(x[0]); };
  std::ostringstream d;
  d << "onsite beta=" << beta;
  p.description = d.str();
  return p;
}

LocalPotential pair_cosine(int dimension, int axis, double beta) {
  LocalPotential p;
  std::vector<int> step(dimension, 0);
  step[axis] = 1;
  p.support = {std::vector<int>(dimension, 0), step};
  p.value = [beta](std::span<const double> x) { return beta * std::cos(x[0] - x[1]); };
  p.partial = [beta](std::span<const double> x, std::size_t k) {
    const double s = beta * std::sin(x[0] - x[1]);
    return k == 0 ? -s : s;
  };
  std::ostringstream d;
  d << "pair axis=" << axis << " beta=" << beta;
  p.description = d.str();
  return p;
}

Hamiltonian::Hamiltonian(const Lattice& lattice, std::vector<LocalPotential> potentials)
    : potentials_(std::move(potentials)), incidence_(lattice.site_count()) {
  const int d = lattice.dimension();
  for (std::size_t p = 0; p < potentials_.size(); ++p) {
    const auto& support = potentials_[p].support;
    int reach = 0;
    for (const auto& off : support) {
      if (static_cast<int>(off.size()) != d)
        fail(ErrorKind::InvalidArgument, "potential support dimension mismatch");
      for (int x : off) reach = std::max(reach, std::abs(x));
    }
    range_ = std::max(range_, reach);

    auto add_anchor = [&](std::span<const int> anchor) {
      Term term{p, {}};
      bool touches_box = false;
      std::vector<int> at(d);
      for (const auto& off : support) {
        for (int k = 0; k < d; ++k) at[k] = anchor[k] + off[k];
        auto site = lattice.site_at(at);
        touches_box = touches_box || site.has_value();
        term.sites.push_back(site);
      }
      if (!touches_box) return;
      const std::size_t index = terms_.size();
      for (std::size_t slot = 0; slot < term.sites.size(); ++slot)
        if (term.sites[slot]) incidence_[*term.sites[slot]].push_back({index, slot});
      terms_.push_back(std::move(term));
    };

    if (lattice.closure() == Closure::Periodic) {
      for (std::size_t s = 0; s < lattice.site_count(); ++s) add_anchor(lattice.coords(s));
    } else {
      // Anchors in the box enlarged by the support reach.
      const int lo = -lattice.half_width() - reach;
      const int span = 2 * (lattice.half_width() + reach) + 1;
      std::size_t count = 1;
      for (int k = 0; k < d; ++k) count *= static_cast<std::size_t>(span);
      std::vector<int> anchor(d);
      for (std::size_t c = 0; c < count; ++c) {
        std::size_t rest = c;
        for (int k = d - 1; k >= 0; --k) {
          anchor[k] = lo + static_cast<int>(rest % span);
          rest /= span;
        }
        add_anchor(anchor);
      }
    }
  }
}

double Hamiltonian::term_value(const Term& term, const Configuration& eta,
                               std::vector<double>& buffer) const {
  buffer.resize(term.sites.size());
  for (std::size_t k = 0; k < term.sites.size(); ++k)
    buffer[k] = term.sites[k] ? eta.angle(*term.sites[k]) : 0.0;
  return potentials_[term.potential].value(buffer);
}

double Hamiltonian::value(const Configuration& eta) const {
  std::vector<double> buffer;
  double total = 0.0;
  for (const auto& term : terms_) total += term_value(term, eta, buffer);
  return total;
}

double Hamiltonian::partial(const Configuration& eta, std::size_t site) const {
  // Local terms are small; keep the gathered angles on the stack.
  constexpr std::size_t kInline = 16;
  double inline_buffer[kInline];
  std::vector<double> heap;
  double total = 0.0;
  for (const auto& [index, slot] : incidence_[site]) {
    const auto& term = terms_[index];
    double* x = inline_buffer;
    if (term.sites.size() > kInline) {
      heap.resize(term.sites.size());
      x = heap.data();
    }
    for (std::size_t k = 0; k < term.sites.size(); ++k)
      x[k] = term.sites[k] ? eta.angle(*term.sites[k]) : 0.0;
    total += potentials_[term.potential].partial({x, term.sites.size()}, slot);
  }
  return total;
}

DiffusionSpec build_ibm_model(std::vector<LocalPotential> potentials, const Lattice& lattice,
                              const Grid& grid) {
  std::string label = "ibm";
  for (const auto& p : potentials) label += " [" + p.description + "]";
  Hamiltonian hamiltonian(lattice, std::move(potentials));
  CoefficientField field;
  field.range = hamiltonian.range();
  field.diffusion = [](const Configuration&, std::size_t) { return 2.0; };
  field.drift = [hamiltonian](const Configuration& eta, std::size_t i) {
    return hamiltonian.partial(eta, i);
  };
  field.a_min = 2.0;
  field.a_max = 2.0;
  field.b_max = local_sup(field.drift, field.range, lattice, grid);
  return DiffusionSpec{lattice, grid, std::move(field), std::move(hamiltonian), std::nullopt,
                       std::move(label)};
}

DiffusionSpec build_custom_model(const CustomCoefficients& params, const Lattice& lattice,
                                 const Grid& grid) {
  CoefficientField field;
  field.range = params.coupling != 0.0 ? 1 : 0;
  field.diffusion = [params](const Configuration& eta, std::size_t i) {
    return params.a0 + params.a1 * std::cos(eta.angle(i));
  };
  field.drift = [params](const Configuration& eta, std::size_t i) {
    double b = params.b0 + params.b1 * std::sin(eta.angle(i));
    if (params.coupling != 0.0)
      b += params.coupling * std::sin(eta.neighbor(i, 0, 1) - eta.angle(i));
    return b;
  };
  field.a_min = params.a0 - std::abs(params.a1);
  field.a_max = params.a0 + std::abs(params.a1);
  field.b_max = std::abs(params.b0) + std::abs(params.b1) + std::abs(params.coupling);
  std::ostringstream label;
  label << "custom a0=" << params.a0 << " a1=" << params.a1 << " b0=" << params.b0
        << " b1=" << params.b1 << " coupling=" << params.coupling;
  return DiffusionSpec{lattice, grid, std::move(field), std::nullopt, std::nullopt, label.str()};
}

namespace {

PerturbationField site_restricted(std::vector<std::size_t> active, int range, double c_max,
                                  std::function<double(const Configuration&, std::size_t)> c,
                                  std::string description) {
  std::vector<char> mask;
  std::size_t top = active.empty() ? 0 : *std::max_element(active.begin(), active.end()) + 1;
  mask.assign(top, 0);
  for (auto s : active) mask[s] = 1;
  PerturbationField field;
  field.range = range;
  field.active_sites = std::move(active);
  field.c_max = c_max;
  field.description = std::move(description);
  field.coefficient = [mask = std::move(mask), c = std::move(c)](const Configuration& eta,
                                                                  std::size_t i) {
    return (i < mask.size() && mask[i]) ? c(eta, i) : 0.0;
  };
  return field;
}

}  // namespace

PerturbationField origin_derivative(const Lattice& lattice, double amplitude) {
  return site_restricted({*lattice.origin()}, 0, std::abs(amplitude),
                         [amplitude](const Configuration&, std::size_t) { return amplitude; },
                         "origin derivative");
}

PerturbationField uniform_derivative(const Lattice& lattice, double amplitude) {
  std::vector<std::size_t> all(lattice.site_count());
  std::iota(all.begin(), all.end(), std::size_t{0});
  return site_restricted(std::move(all), 0, std::abs(amplitude),
                         [amplitude](const Configuration&, std::size_t) { return amplitude; },
                         "uniform derivative");
}

PerturbationField origin_sine(const Lattice& lattice, double amplitude) {
  return site_restricted({*lattice.origin()}, 0, std::abs(amplitude),
                         [amplitude](const Configuration& eta, std::size_t i) {
                           return amplitude * std::sin(eta.angle(i));
                         },
                         "origin sine");
}

CoefficientField perturbed_coefficients(const CoefficientField& base, const PerturbationField& c,
                                        double eps) {
  CoefficientField out = base;
  out.range = std::max(base.range, c.range);
  out.drift = [b = base.drift, cf = c.coefficient, eps](const Configuration& eta, std::size_t i) {
    return b(eta, i) + eps * cf(eta, i);
  };
  out.b_max = base.b_max + std::abs(eps) * c.c_max;
  return out;
}

}  // namespace torusdiff
