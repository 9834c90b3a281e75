#pragma once

// Run configuration. Files are YAML with the sections below; unknown keys are
// rejected with their line number.
//
//   section       key                  default          meaning
//   lattice       dimension            1                d
//                 half_width           0                box [-n, n]^d
//                 closure              frozen           frozen | periodic
//   grid          points               16               M (even, >= 4)
//   model         builtin              ibm              ibm | custom
//                 potential            onsite           ibm: onsite | pair | onsite+pair
//                 beta                 0.5              ibm coupling
//                 a0 a1 b0 b1 coupling 2 0 0 0 0        custom coefficients
//   perturbation  kind                 none             none | origin_derivative |
//                                                       uniform_derivative | origin_sine
//                 amplitude            1                scale of c
//   experiment    name                 all              stationary | gap | perturb |
//                                                       projector | l2decay | supdecay |
//                                                       truncate | hyper | sde | all
//                 order                6                series order K
//                 epsilon              []               empty: epsilon_fraction * fitted radius
//                 epsilon_fraction     0.1
//                 contour_nodes        16               initial Q
//                 max_contour_nodes    4096
//                 tmax                 5                end of decay/hyper/truncation grids
//                 time_points          20               grid t_k = tmax k / time_points, k >= 1
//                 samples              20               random test functions
//                 trig_degree          3
//                 dt                   0.001            Euler-Maruyama step
//                 paths                10000
//                 horizon              0.5              Monte Carlo time T
//                 start                []               start angles (snapped to the grid); empty: 0
//                 truncation_n         1
//                 truncation_n_prime   2
//                 truncation_points    0                grid M for truncation; 0: grid.points
//                 stationary_method    auto             auto | dense | gmres | sparse_lu
//   tolerances    see Tolerances below
//   seed                               7
//   output                             out
//   state_cap                          10000000

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "torusdiff/model.hpp"

namespace torusdiff {

struct LatticeConfig {
  int dimension = 1;
  int half_width = 0;
  Closure closure = Closure::Frozen;
};

struct ModelConfig {
  std::string builtin = "ibm";
  std::string potential = "onsite";
  double beta = 0.5;
  CustomCoefficients custom;
};

struct PerturbationConfig {
  std::string kind = "none";
  double amplitude = 1.0;
};

struct ExperimentConfig {
  std::string name = "all";
  int order = 6;
  std::vector<double> epsilon;
  double epsilon_fraction = 0.1;
  int contour_nodes = 16;
  int max_contour_nodes = 4096;
  double tmax = 5.0;
  int time_points = 20;
  int samples = 20;
  int trig_degree = 3;
  double dt = 1e-3;
  std::size_t paths = 10000;
  double horizon = 0.5;
  std::vector<double> start;
  int truncation_n = 1;
  int truncation_n_prime = 2;
  int truncation_points = 0;
  std::string stationary_method = "auto";
};

/// Every threshold that decides a verdict.
struct Tolerances {
  double stationary_residual = 1e-10;
  double dense_agreement_tv = 1e-8;
  double recurrence_residual = 1e-9;
  double coefficient_mean = 1e-12;
  double idempotency = 1e-8;
  double unperturbed_projector = 1e-8;
  double projector_density = 1e-6;
  double contour_change = 1e-8;
  double eigenvector_equality = 1e-6;
  double fit_r_squared = 0.99;
  double sup_rate_fraction = 0.5;
  double truncation_slack = 1e-12;
  double monte_carlo_sigmas = 3.0;
};

struct RunConfig {
  LatticeConfig lattice;
  int grid_points = 16;
  ModelConfig model;
  PerturbationConfig perturbation;
  ExperimentConfig experiment;
  Tolerances tolerances;
  std::uint64_t seed = 7;
  std::string output = "out";
  std::size_t state_cap = kDefaultStateCap;
  /// File the config was read from (not part of the resolved record).
  std::string source;
};

inline const std::vector<std::string>& experiment_names() {
  static const std::vector<std::string> names{"stationary", "gap",      "perturb", "projector",
                                              "l2decay",    "supdecay", "truncate", "hyper",
                                              "sde",        "all"};
  return names;
}

/// Throws ConfigError naming the line and key of the first problem.
RunConfig parse_config(std::string_view text, std::string source = "<string>");
RunConfig load_config(const std::string& path);

/// Command-line overrides: experiment, order, epsilon (comma list), seed, out,
/// contour-nodes, dt, paths, tmax.
void apply_override(RunConfig& config, std::string_view key, std::string_view value);

/// Cross-field checks; throws ConfigError.
void validate(const RunConfig& config);

/// The model at the configured half width, or at `half_width` if given.
DiffusionSpec build_spec(const RunConfig& config, std::optional<int> half_width = {});
std::optional<PerturbationField> build_perturbation(const RunConfig& config, const Lattice& lattice);

/// Fully resolved config, every default included.
nlohmann::ordered_json to_json(const RunConfig& config);

}  // namespace torusdiff
