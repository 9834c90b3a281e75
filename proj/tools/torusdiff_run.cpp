#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "torusdiff/errors.hpp"
#include "torusdiff/experiments.hpp"

namespace {

constexpr int kExitPass = 0;
constexpr int kExitVerdict = 1;
constexpr int kExitConfig = 2;
constexpr int kExitNumeric = 3;

torusdiff::ExperimentReport read_report(const std::string& path) {
  std::ifstream in(path);
  if (!in) torusdiff::fail(torusdiff::ErrorKind::ConfigError, "cannot open report '" + path + "'");
  try {
    return torusdiff::ExperimentReport::from_json(torusdiff::Json::parse(in));
  } catch (const nlohmann::json::parse_error& e) {
    torusdiff::fail(torusdiff::ErrorKind::ConfigError, "'" + path + "' is not JSON: " + e.what());
  }
}

int compare_reports(const std::vector<std::string>& paths, const std::string& tolerance_path) {
  torusdiff::ToleranceSpec tolerances;
  if (!tolerance_path.empty()) {
    std::ifstream in(tolerance_path);
    if (!in) torusdiff::fail(torusdiff::ErrorKind::ConfigError, "cannot open '" + tolerance_path + "'");
    try {
      tolerances = torusdiff::ToleranceSpec::from_json(torusdiff::Json::parse(in));
    } catch (const nlohmann::json::parse_error& e) {
      torusdiff::fail(torusdiff::ErrorKind::ConfigError, std::string("tolerance file: ") + e.what());
    }
  }
  const auto diffs = torusdiff::compare(read_report(paths[0]), read_report(paths[1]), tolerances);
  for (const auto& d : diffs)
    std::cout << d.field << ": " << d.left << " vs " << d.right << " (|diff| " << d.difference
              << ", allowed " << d.allowed << ")\n";
  std::cout << (diffs.empty() ? "reports agree\n" : std::to_string(diffs.size()) + " field(s) differ\n");
  return diffs.empty() ? kExitPass : kExitVerdict;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Run lattice diffusion experiments on a discretized torus"};
  std::string config_path;
  std::vector<std::string> compare;
  std::string tolerance_path;
  std::vector<std::pair<std::string, std::string>> overrides;
  app.add_option("--config", config_path, "YAML run configuration");
  auto add = [&](const std::string& key, const std::string& help) {
    app.add_option_function<std::string>("--" + key,
                                         [&overrides, key](const std::string& v) { overrides.emplace_back(key, v); },
                                         help);
  };
  add("experiment", "stationary|gap|perturb|projector|l2decay|supdecay|truncate|hyper|sde|all");
  add("order", "series order K");
  add("epsilon", "comma separated perturbation strengths");
  add("seed", "random seed");
  add("out", "output directory");
  add("contour-nodes", "initial contour quadrature nodes");
  add("dt", "Euler-Maruyama step");
  add("paths", "Monte Carlo paths");
  add("tmax", "end of the time grid");
  app.add_option("--compare", compare, "compare two report.json files")->expected(2);
  app.add_option("--tolerances", tolerance_path, "JSON tolerance spec for --compare");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitPass : kExitConfig;
  }

  try {
    if (!compare.empty()) return compare_reports(compare, tolerance_path);
    if (config_path.empty()) torusdiff::fail(torusdiff::ErrorKind::ConfigError, "--config is required");
    auto config = torusdiff::load_config(config_path);
    for (const auto& [key, value] : overrides) torusdiff::apply_override(config, key, value);
    const auto outcome = torusdiff::run(config);
    for (const auto& report : outcome.reports) {
      std::cout << (report.passed() ? "PASS " : "FAIL ") << report.experiment << " (" << report.wall_time << " s)\n";
      for (const auto& v : report.verdicts)
        if (!v.pass) std::cout << "  failed " << v.name << ": " << v.detail << '\n';
    }
    for (const auto& name : outcome.skipped) std::cout << "SKIP " << name << " (not applicable)\n";
    std::cout << "results in " << config.output << '\n';
    return outcome.passed() ? kExitPass : kExitVerdict;
  } catch (const torusdiff::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return e.kind() == torusdiff::ErrorKind::ConfigError ? kExitConfig : kExitNumeric;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitNumeric;
  }
}
