#include "torusdiff/report.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <sstream>

#include "torusdiff/errors.hpp"

namespace torusdiff {

bool ExperimentReport::passed() const {
  for (const auto& v : verdicts)
    if (!v.pass) return false;
  return true;
}

void ExperimentReport::verdict(std::string name, bool pass, std::string detail) {
  verdicts.push_back({std::move(name), pass, std::move(detail)});
}

Json ExperimentReport::to_json(bool with_timing) const {
  Json j;
  j["experiment"] = experiment;
  j["inputs_hash"] = inputs_hash;
  j["passed"] = passed();
  j["metrics"] = metrics;
  Json v = Json::array();
  for (const auto& item : verdicts) v.push_back({{"name", item.name}, {"pass", item.pass}, {"detail", item.detail}});
  j["verdicts"] = v;
  j["files"] = files;
  if (with_timing) j["wall_time"] = wall_time;
  return j;
}

ExperimentReport ExperimentReport::from_json(const Json& j) {
  ExperimentReport r;
  try {
    r.experiment = j.at("experiment").get<std::string>();
    r.inputs_hash = j.at("inputs_hash").get<std::string>();
    r.metrics = j.at("metrics");
    for (const auto& v : j.at("verdicts"))
      r.verdicts.push_back({v.at("name").get<std::string>(), v.at("pass").get<bool>(),
                            v.value("detail", std::string())});
    if (j.contains("files")) r.files = j.at("files").get<std::vector<std::string>>();
    r.wall_time = j.value("wall_time", 0.0);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::ConfigError, std::string("malformed report: ") + e.what());
  }
  return r;
}

std::string fnv1a_hex(std::string_view bytes) {
  std::uint64_t hash = 14695981039346656037ull;
  for (unsigned char c : bytes) {
    hash ^= c;
    hash *= 1099511628211ull;
  }
  std::ostringstream out;
  out << std::hex;
  out.width(16);
  out.fill('0');
  out << hash;
  return out.str();
}

ToleranceSpec ToleranceSpec::from_json(const Json& j) {
  auto parse = [](const Json& item) {
    FieldTolerance t;
    t.absolute = item.value("absolute", 0.0);
    t.relative = item.value("relative", 0.0);
    if (item.contains("sigma")) t.sigma = item.at("sigma").get<std::string>();
    t.sigmas = item.value("sigmas", 3.0);
    t.total_variation = item.value("total_variation", false);
    t.ignore = item.value("ignore", false);
    return t;
  };
  ToleranceSpec spec;
  try {
    if (j.contains("default")) spec.fallback = parse(j.at("default"));
    if (j.contains("fields"))
      for (const auto& [key, item] : j.at("fields").items()) spec.fields[key] = parse(item);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::ConfigError, std::string("malformed tolerance spec: ") + e.what());
  }
  return spec;
}

namespace {

void flatten(const Json& j, const std::string& prefix, std::map<std::string, Json>& out) {
  if (j.is_object()) {
    for (const auto& [key, value] : j.items()) flatten(value, prefix.empty() ? key : prefix + "." + key, out);
  } else {
    out[prefix] = j;
  }
}

const Json* lookup(const std::map<std::string, Json>& flat, const std::string& key) {
  const auto it = flat.find(key);
  return it == flat.end() ? nullptr : &it->second;
}

std::string sibling(const std::string& field, const std::string& name) {
  const auto dot = field.rfind('.');
  return dot == std::string::npos ? name : field.substr(0, dot + 1) + name;
}

double allowance(const FieldTolerance& t, double a, double b, const std::string& field,
                 const std::map<std::string, Json>& fa, const std::map<std::string, Json>& fb) {
  double allowed = t.absolute + t.relative * std::max(std::abs(a), std::abs(b));
  if (t.sigma) {
    const Json* sa = lookup(fa, sibling(field, *t.sigma));
    const Json* sb = lookup(fb, sibling(field, *t.sigma));
    if (sa && sb && sa->is_number() && sb->is_number()) {
      const double se_a = sa->get<double>(), se_b = sb->get<double>();
      allowed += t.sigmas * std::sqrt(se_a * se_a + se_b * se_b);
    }
  }
  return allowed;
}

}  // namespace

std::vector<DiffEntry> compare(const ExperimentReport& a, const ExperimentReport& b,
                               const ToleranceSpec& tolerances) {
  std::vector<DiffEntry> diffs;
  auto ignored = [&](const std::string& field) {
    const auto it = tolerances.fields.find(field);
    return it != tolerances.fields.end() && it->second.ignore;
  };
  if (a.experiment != b.experiment) diffs.push_back({"experiment", a.experiment, b.experiment, 0.0, 0.0});
  std::map<std::string, Json> fa, fb;
  flatten(a.metrics, "", fa);
  flatten(b.metrics, "", fb);
  for (const auto& [field, left] : fa) {
    if (ignored(field)) continue;
    const Json* right = lookup(fb, field);
    if (!right) {
      diffs.push_back({field, left.dump(), "<missing>", 0.0, 0.0});
      continue;
    }
    const auto it = tolerances.fields.find(field);
    const FieldTolerance& tol = it == tolerances.fields.end() ? tolerances.fallback : it->second;
    if (left.is_number() && right->is_number()) {
      const double x = left.get<double>(), y = right->get<double>();
      const double allowed = allowance(tol, x, y, field, fa, fb);
      const double d = std::abs(x - y);
      if (d > allowed || std::isnan(x) != std::isnan(y))
        diffs.push_back({field, left.dump(), right->dump(), d, allowed});
    } else if (left.is_array() && right->is_array() && left.size() == right->size() &&
               std::all_of(left.begin(), left.end(), [](const Json& v) { return v.is_number(); }) &&
               std::all_of(right->begin(), right->end(), [](const Json& v) { return v.is_number(); })) {
      if (tol.total_variation) {
        double tv = 0.0;
        for (std::size_t i = 0; i < left.size(); ++i) tv += std::abs(left[i].get<double>() - (*right)[i].get<double>());
        tv *= 0.5;
        if (tv > tol.absolute) diffs.push_back({field, "<array>", "<array>", tv, tol.absolute});
      } else {
        for (std::size_t i = 0; i < left.size(); ++i) {
          const double x = left[i].get<double>(), y = (*right)[i].get<double>();
          const double allowed = allowance(tol, x, y, field, fa, fb);
          const double d = std::abs(x - y);
          if (d > allowed)
            diffs.push_back({field + "[" + std::to_string(i) + "]", left[i].dump(), (*right)[i].dump(), d, allowed});
        }
      }
    } else if (left != *right) {
      diffs.push_back({field, left.dump(), right->dump(), 0.0, 0.0});
    }
  }
  for (const auto& [field, right] : fb)
    if (!ignored(field) && !lookup(fa, field)) diffs.push_back({field, "<missing>", right.dump(), 0.0, 0.0});

  std::map<std::string, bool> va;
  for (const auto& v : a.verdicts) va[v.name] = v.pass;
  for (const auto& v : b.verdicts) {
    if (ignored("verdict." + v.name)) {
      va.erase(v.name);
      continue;
    }
    const auto it = va.find(v.name);
    if (it == va.end()) {
      diffs.push_back({"verdict." + v.name, "<missing>", v.pass ? "pass" : "fail", 0.0, 0.0});
    } else {
      if (it->second != v.pass)
        diffs.push_back({"verdict." + v.name, it->second ? "pass" : "fail", v.pass ? "pass" : "fail", 0.0, 0.0});
      va.erase(it);
    }
  }
  for (const auto& [name, pass] : va)
    if (!ignored("verdict." + name)) diffs.push_back({"verdict." + name, pass ? "pass" : "fail", "<missing>", 0.0, 0.0});
  return diffs;
}

void write_report_csv(std::ostream& out, const ExperimentReport& report) {
  std::map<std::string, Json> flat;
  flatten(report.metrics, "", flat);
  out << "# field,value\n";
  for (const auto& [field, value] : flat) {
    out << field << ',';
    if (value.is_array()) {
      bool first = true;
      for (const auto& v : value) {
        if (!first) out << ';';
        first = false;
        out << (v.is_string() ? v.get<std::string>() : v.dump());
      }
    } else {
      out << (value.is_string() ? value.get<std::string>() : value.dump());
    }
    out << '\n';
  }
  for (const auto& v : report.verdicts) out << "verdict." << v.name << ',' << (v.pass ? "pass" : "fail") << '\n';
}

}  // namespace torusdiff
