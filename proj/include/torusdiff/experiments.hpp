#pragma once

// Named experiments driven by a RunConfig. A Session computes the shared
// objects (generator, measure, spectral data, series) once and on demand.

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "torusdiff/config.hpp"
#include "torusdiff/dynamics.hpp"
#include "torusdiff/perturbation.hpp"
#include "torusdiff/report.hpp"

namespace torusdiff {

class Session {
 public:
  explicit Session(RunConfig config);

  const RunConfig& config() const noexcept { return config_; }
  const DiffusionSpec& spec() const noexcept { return spec_; }
  const StateSpace& states() const noexcept { return states_; }

  const OperatorMatrix& generator();
  const Measure& measure();
  const SymmetricSplit& split();
  const SpectralReport& spectral();
  /// HolleyStroock when the model has a Hamiltonian, GapLowerProxy otherwise.
  const LsiEstimate& lsi();
  /// min a_i / 2.
  double ellipticity();

  /// Throws ConfigError when the config has no perturbation.
  const PerturbationField& perturbation() const;
  const OperatorMatrix& perturbation_operator();
  const SeriesResult& series();
  const RadiusFit& radius_fit();
  double c0();
  /// Configured epsilons, or epsilon_fraction times the fitted radius.
  std::vector<double> epsilons();
  /// tmax k / time_points for k = 1 .. time_points.
  std::vector<double> time_grid() const;

 private:
  RunConfig config_;
  DiffusionSpec spec_;
  StateSpace states_;
  std::optional<OperatorMatrix> generator_;
  std::optional<Measure> measure_;
  std::optional<SymmetricSplit> split_;
  std::optional<SpectralReport> spectral_;
  std::optional<LsiEstimate> lsi_;
  std::optional<double> ellipticity_;
  std::optional<OperatorMatrix> perturbation_operator_;
  std::optional<SeriesResult> series_;
  std::optional<RadiusFit> radius_fit_;
  std::optional<double> c0_;
};

/// Runs one experiment (not "all"). Files go under `directory` when given.
ExperimentReport run_experiment(Session& session, const std::string& name,
                                const std::optional<std::filesystem::path>& directory = {});

/// Experiments that apply to the configured model, in canonical order.
std::vector<std::string> applicable_experiments(const Session& session);

struct RunOutcome {
  std::vector<ExperimentReport> reports;
  std::vector<std::string> skipped;
  Json manifest;
  bool passed() const;
};

/// Executes the configured experiment (or all applicable ones) and, when
/// `write_files` is set, writes manifest.json and one directory per experiment
/// with report.json and report.csv under the output directory.
RunOutcome run(const RunConfig& config, bool write_files = true);

}  // namespace torusdiff
