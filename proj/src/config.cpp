#include "torusdiff/config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include <yaml-cpp/yaml.h>

#include "torusdiff/errors.hpp"

namespace torusdiff {

namespace {

[[noreturn]] void config_error(const YAML::Node& node, const std::string& key, const std::string& what) {
  std::ostringstream msg;
  const auto mark = node.Mark();
  if (mark.line >= 0) msg << "line " << mark.line + 1 << ": ";
  msg << "key '" << key << "': " << what;
  fail(ErrorKind::ConfigError, msg.str());
}

template <class T>
T scalar(const YAML::Node& node, const std::string& key) {
  if (!node.IsScalar()) config_error(node, key, "expected a scalar");
  try {
    return node.as<T>();
  } catch (const YAML::Exception&) {
    config_error(node, key, "cannot convert '" + node.Scalar() + "'");
  }
}

std::vector<double> number_list(const YAML::Node& node, const std::string& key) {
  if (node.IsNull()) return {};
  if (node.IsScalar()) return {scalar<double>(node, key)};
  if (!node.IsSequence()) config_error(node, key, "expected a list of numbers");
  std::vector<double> out;
  for (const auto& item : node) out.push_back(scalar<double>(item, key));
  return out;
}

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  return s;
}

std::string choice(const YAML::Node& node, const std::string& key, const std::vector<std::string>& allowed) {
  const std::string value = lower(scalar<std::string>(node, key));
  if (std::find(allowed.begin(), allowed.end(), value) == allowed.end()) {
    std::string list;
    for (const auto& a : allowed) list += (list.empty() ? "" : ", ") + a;
    config_error(node, key, "'" + value + "' is not one of " + list);
  }
  return value;
}

using Handler = std::function<void(const YAML::Node&, const std::string&)>;

void walk(const YAML::Node& section, const std::string& name, const std::map<std::string, Handler>& handlers) {
  if (section.IsNull()) return;
  if (!section.IsMap()) config_error(section, name, "expected a mapping");
  for (const auto& item : section) {
    const std::string key = item.first.as<std::string>();
    const auto it = handlers.find(key);
    if (it == handlers.end()) {
      config_error(item.first, name.empty() ? key : name + "." + key, "unknown key");
    }
    it->second(item.second, name.empty() ? key : name + "." + key);
  }
}

Closure parse_closure(const YAML::Node& node, const std::string& key) {
  return choice(node, key, {"frozen", "periodic"}) == "frozen" ? Closure::Frozen : Closure::Periodic;
}

template <class T>
Handler set(T& target) {
  return [&target](const YAML::Node& n, const std::string& k) { target = scalar<T>(n, k); };
}

const std::vector<std::string> kPotentials{"onsite", "pair", "onsite+pair"};
const std::vector<std::string> kPerturbations{"none", "origin_derivative", "uniform_derivative", "origin_sine"};
const std::vector<std::string> kStationaryMethods{"auto", "dense", "gmres", "sparse_lu"};

template <class T>
T parse_number(std::string_view key, std::string_view text) {
  T value{};
  const auto* end = text.data() + text.size();
  const auto result = std::from_chars(text.data(), end, value);
  if (result.ec != std::errc() || result.ptr != end)
    fail(ErrorKind::ConfigError, "override --" + std::string(key) + ": cannot parse '" + std::string(text) + "'");
  return value;
}

}  // namespace

RunConfig parse_config(std::string_view text, std::string source) {
  YAML::Node root;
  try {
    root = YAML::Load(std::string(text));
  } catch (const YAML::ParserException& e) {
    std::ostringstream msg;
    msg << source << ": line " << e.mark.line + 1 << ": " << e.msg;
    fail(ErrorKind::ConfigError, msg.str());
  }
  RunConfig c;
  c.source = std::move(source);
  if (root.IsNull()) return c;
  auto& lat = c.lattice;
  auto& mod = c.model;
  auto& per = c.perturbation;
  auto& exp = c.experiment;
  auto& tol = c.tolerances;
  try {
    walk(root, "",
         {{"lattice",
           [&](const YAML::Node& n, const std::string& k) {
             walk(n, k,
                  {{"dimension", set(lat.dimension)},
                   {"half_width", set(lat.half_width)},
                   {"closure", [&](const YAML::Node& v, const std::string& kk) { lat.closure = parse_closure(v, kk); }}});
           }},
          {"grid", [&](const YAML::Node& n, const std::string& k) { walk(n, k, {{"points", set(c.grid_points)}}); }},
          {"model",
           [&](const YAML::Node& n, const std::string& k) {
             walk(n, k,
                  {{"builtin", [&](const YAML::Node& v, const std::string& kk) { mod.builtin = choice(v, kk, {"ibm", "custom"}); }},
                   {"potential", [&](const YAML::Node& v, const std::string& kk) { mod.potential = choice(v, kk, kPotentials); }},
                   {"beta", set(mod.beta)},
                   {"a0", set(mod.custom.a0)},
                   {"a1", set(mod.custom.a1)},
                   {"b0", set(mod.custom.b0)},
                   {"b1", set(mod.custom.b1)},
                   {"coupling", set(mod.custom.coupling)}});
           }},
          {"perturbation",
           [&](const YAML::Node& n, const std::string& k) {
             walk(n, k,
                  {{"kind", [&](const YAML::Node& v, const std::string& kk) { per.kind = choice(v, kk, kPerturbations); }},
                   {"amplitude", set(per.amplitude)}});
           }},
          {"experiment",
           [&](const YAML::Node& n, const std::string& k) {
             walk(n, k,
                  {{"name", [&](const YAML::Node& v, const std::string& kk) { exp.name = choice(v, kk, experiment_names()); }},
                   {"order", set(exp.order)},
                   {"epsilon", [&](const YAML::Node& v, const std::string& kk) { exp.epsilon = number_list(v, kk); }},
                   {"epsilon_fraction", set(exp.epsilon_fraction)},
                   {"contour_nodes", set(exp.contour_nodes)},
                   {"max_contour_nodes", set(exp.max_contour_nodes)},
                   {"tmax", set(exp.tmax)},
                   {"time_points", set(exp.time_points)},
                   {"samples", set(exp.samples)},
                   {"trig_degree", set(exp.trig_degree)},
                   {"dt", set(exp.dt)},
                   {"paths", set(exp.paths)},
                   {"horizon", set(exp.horizon)},
                   {"start", [&](const YAML::Node& v, const std::string& kk) { exp.start = number_list(v, kk); }},
                   {"truncation_n", set(exp.truncation_n)},
                   {"truncation_n_prime", set(exp.truncation_n_prime)},
                   {"truncation_points", set(exp.truncation_points)},
                   {"stationary_method",
                    [&](const YAML::Node& v, const std::string& kk) { exp.stationary_method = choice(v, kk, kStationaryMethods); }}});
           }},
          {"tolerances",
           [&](const YAML::Node& n, const std::string& k) {
             walk(n, k,
                  {{"stationary_residual", set(tol.stationary_residual)},
                   {"dense_agreement_tv", set(tol.dense_agreement_tv)},
                   {"recurrence_residual", set(tol.recurrence_residual)},
                   {"coefficient_mean", set(tol.coefficient_mean)},
                   {"idempotency", set(tol.idempotency)},
                   {"unperturbed_projector", set(tol.unperturbed_projector)},
                   {"projector_density", set(tol.projector_density)},
                   {"contour_change", set(tol.contour_change)},
                   {"eigenvector_equality", set(tol.eigenvector_equality)},
                   {"fit_r_squared", set(tol.fit_r_squared)},
                   {"sup_rate_fraction", set(tol.sup_rate_fraction)},
                   {"truncation_slack", set(tol.truncation_slack)},
                   {"monte_carlo_sigmas", set(tol.monte_carlo_sigmas)}});
           }},
          {"seed", set(c.seed)},
          {"output", set(c.output)},
          {"state_cap", set(c.state_cap)}});
  } catch (const Error& e) {
    fail(ErrorKind::ConfigError, c.source + ": " + std::string(e.what()).substr(std::string("ConfigError: ").size()));
  } catch (const YAML::Exception& e) {
    std::ostringstream msg;
    msg << c.source << ": line " << e.mark.line + 1 << ": " << e.msg;
    fail(ErrorKind::ConfigError, msg.str());
  }
  validate(c);
  return c;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::ConfigError, "cannot open config file '" + path + "'");
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_config(buffer.str(), path);
}

void apply_override(RunConfig& config, std::string_view key, std::string_view value) {
  auto& exp = config.experiment;
  if (key == "experiment") {
    const auto& names = experiment_names();
    if (std::find(names.begin(), names.end(), value) == names.end())
      fail(ErrorKind::ConfigError, "override --experiment: unknown experiment '" + std::string(value) + "'");
    exp.name = value;
  } else if (key == "order") {
    exp.order = parse_number<int>(key, value);
  } else if (key == "epsilon") {
    exp.epsilon.clear();
    std::size_t pos = 0;
    while (pos <= value.size()) {
      const auto comma = value.find(',', pos);
      const auto piece = value.substr(pos, comma == std::string_view::npos ? std::string_view::npos : comma - pos);
      if (!piece.empty()) exp.epsilon.push_back(parse_number<double>(key, piece));
      if (comma == std::string_view::npos) break;
      pos = comma + 1;
    }
  } else if (key == "seed") {
    config.seed = parse_number<std::uint64_t>(key, value);
  } else if (key == "out") {
    config.output = value;
  } else if (key == "contour-nodes") {
    exp.contour_nodes = parse_number<int>(key, value);
  } else if (key == "dt") {
    exp.dt = parse_number<double>(key, value);
  } else if (key == "paths") {
    exp.paths = parse_number<std::size_t>(key, value);
  } else if (key == "tmax") {
    exp.tmax = parse_number<double>(key, value);
  } else {
    fail(ErrorKind::ConfigError, "unknown override --" + std::string(key));
  }
  validate(config);
}

void validate(const RunConfig& c) {
  auto bad = [](const std::string& what) { fail(ErrorKind::ConfigError, what); };
  if (c.lattice.dimension < 1) bad("lattice.dimension must be >= 1");
  if (c.lattice.half_width < 0) bad("lattice.half_width must be >= 0");
  if (c.grid_points < 4 || c.grid_points % 2 != 0) bad("grid.points must be even and >= 4");
  const auto& e = c.experiment;
  if (e.order < 1) bad("experiment.order must be >= 1");
  for (double eps : e.epsilon)
    if (!(eps >= 0.0)) bad("experiment.epsilon entries must be >= 0");
  if (!(e.epsilon_fraction > 0.0)) bad("experiment.epsilon_fraction must be > 0");
  if (e.contour_nodes < 2 || e.contour_nodes % 2 != 0) bad("experiment.contour_nodes must be even and >= 2");
  if (e.max_contour_nodes < e.contour_nodes) bad("experiment.max_contour_nodes must be >= contour_nodes");
  if (!(e.tmax > 0.0)) bad("experiment.tmax must be > 0");
  if (e.time_points < 2) bad("experiment.time_points must be >= 2");
  if (e.samples < 1) bad("experiment.samples must be >= 1");
  if (e.trig_degree < 1) bad("experiment.trig_degree must be >= 1");
  if (!(e.dt > 0.0)) bad("experiment.dt must be > 0");
  if (e.paths < 2) bad("experiment.paths must be >= 2");
  if (!(e.horizon > 0.0)) bad("experiment.horizon must be > 0");
  if (e.truncation_n < 0 || e.truncation_n_prime <= e.truncation_n)
    bad("experiment.truncation_n_prime must exceed truncation_n >= 0");
  if (e.truncation_points != 0 && (e.truncation_points < 4 || e.truncation_points % 2 != 0))
    bad("experiment.truncation_points must be 0 or even and >= 4");
  if (c.model.builtin == "custom" && c.model.potential != "onsite")
    bad("model.potential applies to the ibm model only");
}

DiffusionSpec build_spec(const RunConfig& c, std::optional<int> half_width) {
  const Lattice lattice(c.lattice.dimension, half_width.value_or(c.lattice.half_width), c.lattice.closure);
  const Grid grid(c.grid_points);
  DiffusionSpec spec = [&] {
    if (c.model.builtin == "custom") return build_custom_model(c.model.custom, lattice, grid);
    std::vector<LocalPotential> potentials;
    if (c.model.potential == "onsite" || c.model.potential == "onsite+pair")
      potentials.push_back(onsite_cosine(lattice.dimension(), c.model.beta));
    if (c.model.potential == "pair" || c.model.potential == "onsite+pair")
      for (int axis = 0; axis < lattice.dimension(); ++axis)
        potentials.push_back(pair_cosine(lattice.dimension(), axis, c.model.beta));
    return build_ibm_model(std::move(potentials), lattice, grid);
  }();
  spec.state_cap = c.state_cap;
  spec.perturbation = build_perturbation(c, spec.lattice);
  return spec;
}

std::optional<PerturbationField> build_perturbation(const RunConfig& c, const Lattice& lattice) {
  const auto& kind = c.perturbation.kind;
  if (kind == "origin_derivative") return origin_derivative(lattice, c.perturbation.amplitude);
  if (kind == "uniform_derivative") return uniform_derivative(lattice, c.perturbation.amplitude);
  if (kind == "origin_sine") return origin_sine(lattice, c.perturbation.amplitude);
  return std::nullopt;
}

nlohmann::ordered_json to_json(const RunConfig& c) {
  nlohmann::ordered_json j;
  j["lattice"] = {{"dimension", c.lattice.dimension},
                  {"half_width", c.lattice.half_width},
                  {"closure", to_string(c.lattice.closure)}};
  j["grid"] = {{"points", c.grid_points}};
  nlohmann::ordered_json model{{"builtin", c.model.builtin}};
  if (c.model.builtin == "ibm") {
    model["potential"] = c.model.potential;
    model["beta"] = c.model.beta;
  } else {
    model["a0"] = c.model.custom.a0;
    model["a1"] = c.model.custom.a1;
    model["b0"] = c.model.custom.b0;
    model["b1"] = c.model.custom.b1;
    model["coupling"] = c.model.custom.coupling;
  }
  j["model"] = model;
  j["perturbation"] = {{"kind", c.perturbation.kind}, {"amplitude", c.perturbation.amplitude}};
  const auto& e = c.experiment;
  j["experiment"] = {{"name", e.name},
                     {"order", e.order},
                     {"epsilon", e.epsilon},
                     {"epsilon_fraction", e.epsilon_fraction},
                     {"contour_nodes", e.contour_nodes},
                     {"max_contour_nodes", e.max_contour_nodes},
                     {"tmax", e.tmax},
                     {"time_points", e.time_points},
                     {"samples", e.samples},
                     {"trig_degree", e.trig_degree},
                     {"dt", e.dt},
                     {"paths", e.paths},
                     {"horizon", e.horizon},
                     {"start", e.start},
                     {"truncation_n", e.truncation_n},
                     {"truncation_n_prime", e.truncation_n_prime},
                     {"truncation_points", e.truncation_points},
                     {"stationary_method", e.stationary_method}};
  const auto& t = c.tolerances;
  j["tolerances"] = {{"stationary_residual", t.stationary_residual},
                     {"dense_agreement_tv", t.dense_agreement_tv},
                     {"recurrence_residual", t.recurrence_residual},
                     {"coefficient_mean", t.coefficient_mean},
                     {"idempotency", t.idempotency},
                     {"unperturbed_projector", t.unperturbed_projector},
                     {"projector_density", t.projector_density},
                     {"contour_change", t.contour_change},
                     {"eigenvector_equality", t.eigenvector_equality},
                     {"fit_r_squared", t.fit_r_squared},
                     {"sup_rate_fraction", t.sup_rate_fraction},
                     {"truncation_slack", t.truncation_slack},
                     {"monte_carlo_sigmas", t.monte_carlo_sigmas}};
  j["seed"] = c.seed;
  j["output"] = c.output;
  j["state_cap"] = c.state_cap;
  return j;
}

}  // namespace torusdiff
