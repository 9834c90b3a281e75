#include <sstream>

#include "support.hpp"
#include "torusdiff/config.hpp"
#include "torusdiff/report.hpp"

using namespace torusdiff;
using testing_support::kind_of;

namespace {

std::string error_message(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.what();
  }
  return {};
}

}  // namespace

TEST_CASE("config defaults and parsing") {
  auto c = parse_config(R"(
lattice:
  dimension: 1
  half_width: 1
  closure: periodic
grid:
  points: 10
model:
  builtin: ibm
  potential: onsite+pair
  beta: 0.25
perturbation:
  kind: uniform_derivative
  amplitude: 2
experiment:
  name: perturb
  epsilon: [0.01, 0.02]
seed: 3
)");
  CHECK_EQ(c.lattice.half_width, 1);
  CHECK_EQ(c.lattice.closure, Closure::Periodic);
  CHECK_EQ(c.grid_points, 10);
  CHECK_EQ(c.model.potential, "onsite+pair");
  CHECK_EQ(c.experiment.epsilon.size(), 2u);
  CHECK_EQ(c.experiment.order, 6);
  CHECK_EQ(c.seed, 3u);
  CHECK_EQ(c.tolerances.stationary_residual, 1e-10);

  auto spec = build_spec(c);
  CHECK_EQ(spec.lattice.site_count(), 3u);
  REQUIRE(spec.perturbation.has_value());
  CHECK_EQ(spec.perturbation->active_sites.size(), 3u);
  CHECK(spec.hamiltonian.has_value());
  CHECK_EQ(build_spec(c, 2).lattice.site_count(), 5u);
}

TEST_CASE("unknown keys report their line") {
  const std::string text = "grid:\n  points: 8\nmodel:\n  bta: 0.5\n";
  CHECK_EQ(kind_of([&] { parse_config(text, "x.yaml"); }), ErrorKind::ConfigError);
  const std::string message = error_message([&] { parse_config(text, "x.yaml"); });
  CHECK(message.find("x.yaml") != std::string::npos);
  CHECK(message.find("line 4") != std::string::npos);
  CHECK(message.find("bta") != std::string::npos);
}

TEST_CASE("invalid values are config errors") {
  CHECK_EQ(kind_of([] { parse_config("grid:\n  points: 7\n"); }), ErrorKind::ConfigError);
  CHECK_EQ(kind_of([] { parse_config("grid:\n  points: many\n"); }), ErrorKind::ConfigError);
  CHECK_EQ(kind_of([] { parse_config("experiment:\n  name: nothing\n"); }), ErrorKind::ConfigError);
  CHECK_EQ(kind_of([] { parse_config("lattice: [1, 2\n"); }), ErrorKind::ConfigError);
  CHECK_EQ(kind_of([] { load_config("/nonexistent/run.yaml"); }), ErrorKind::ConfigError);
}

TEST_CASE("command-line overrides") {
  auto c = parse_config("");
  apply_override(c, "order", "4");
  apply_override(c, "epsilon", "0.1,0.2,0.3");
  apply_override(c, "seed", "99");
  apply_override(c, "experiment", "gap");
  apply_override(c, "out", "elsewhere");
  CHECK_EQ(c.experiment.order, 4);
  CHECK_EQ(c.experiment.epsilon, std::vector<double>{0.1, 0.2, 0.3});
  CHECK_EQ(c.seed, 99u);
  CHECK_EQ(c.experiment.name, "gap");
  CHECK_EQ(c.output, "elsewhere");
  CHECK_EQ(kind_of([&] { apply_override(c, "order", "four"); }), ErrorKind::ConfigError);
  CHECK_EQ(kind_of([&] { apply_override(c, "colour", "red"); }), ErrorKind::ConfigError);
}

TEST_CASE("resolved config lists every default") {
  auto j = to_json(parse_config(""));
  CHECK(j.contains("lattice"));
  CHECK(j["experiment"]["contour_nodes"] == 16);
  CHECK(j["tolerances"]["monte_carlo_sigmas"] == 3.0);
  CHECK(j["seed"] == 7);
}

TEST_CASE("FNV-1a reference values") {
  CHECK_EQ(fnv1a_hex(""), "cbf29ce484222325");
  CHECK_EQ(fnv1a_hex("a"), "af63dc4c8601ec8c");
  CHECK_EQ(fnv1a_hex("foobar"), "85944171f73967e8");
}

TEST_CASE("report round trip and comparison") {
  ExperimentReport a;
  a.experiment = "sde";
  a.inputs_hash = "0";
  a.metrics["mc"] = {{"mean", 0.5}, {"standard_error", 0.01}};
  a.metrics["measure"] = Json::array({0.25, 0.25, 0.5});
  a.verdict("ok", true);
  a.wall_time = 1.5;
  auto b = ExperimentReport::from_json(a.to_json());
  CHECK(compare(a, b).empty());
  CHECK_FALSE(a.to_json(false).contains("wall_time"));

  b.metrics["mc"]["mean"] = 0.53;
  CHECK_EQ(compare(a, b).size(), 1u);
  auto tol = ToleranceSpec::from_json(Json::parse(R"({"fields": {"mc.mean": {"sigma": "standard_error"}}})"));
  CHECK(compare(a, b, tol).empty());
  b.metrics["mc"]["mean"] = 0.6;
  CHECK_EQ(compare(a, b, tol).size(), 1u);

  b = ExperimentReport::from_json(a.to_json());
  b.metrics["measure"] = Json::array({0.25, 0.26, 0.49});
  auto tv = ToleranceSpec::from_json(Json::parse(R"({"fields": {"measure": {"total_variation": true, "absolute": 0.02}}})"));
  CHECK(compare(a, b, tv).empty());
  CHECK_EQ(compare(a, b).size(), 2u);

  b = ExperimentReport::from_json(a.to_json());
  b.metrics.erase("measure");
  b.verdict("extra", true);
  CHECK_EQ(compare(a, b).size(), 2u);
  auto skip = ToleranceSpec::from_json(Json::parse(R"({"fields": {"measure": {"ignore": true}, "verdict.extra": {"ignore": true}}})"));
  CHECK(compare(a, b, skip).empty());

  b = ExperimentReport::from_json(a.to_json());
  b.verdicts[0].pass = false;
  CHECK_EQ(compare(a, b).size(), 1u);
  CHECK_FALSE(b.passed());

  std::ostringstream csv;
  write_report_csv(csv, a);
  CHECK(csv.str().find("mc.mean,0.5") != std::string::npos);
  CHECK(csv.str().find("measure,0.25;0.25;0.5") != std::string::npos);
}
