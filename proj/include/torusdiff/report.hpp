#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace torusdiff {

using Json = nlohmann::ordered_json;

struct Verdict {
  std::string name;
  bool pass = false;
  std::string detail;
};

struct ExperimentReport {
  std::string experiment;
  std::string inputs_hash;
  /// Nested metrics; numbers, strings, booleans and numeric arrays.
  Json metrics = Json::object();
  std::vector<Verdict> verdicts;
  std::vector<std::string> files;
  double wall_time = 0.0;

  bool passed() const;
  void verdict(std::string name, bool pass, std::string detail = {});
  /// Timing is omitted when `with_timing` is false so that reruns compare equal.
  Json to_json(bool with_timing = true) const;
  static ExperimentReport from_json(const Json& j);
};

/// 64-bit FNV-1a as 16 hex digits.
std::string fnv1a_hex(std::string_view bytes);

/// Allowed difference for one metric path ("series.norms", "mc.mean", ...).
/// `sigma` names a sibling standard-error field; the allowance is then
/// k * sqrt(se_a^2 + se_b^2). `total_variation` compares arrays by half their
/// l1 distance. `ignore` drops the field (or "verdict.<name>") entirely.
struct FieldTolerance {
  double absolute = 0.0;
  double relative = 0.0;
  std::optional<std::string> sigma;
  double sigmas = 3.0;
  bool total_variation = false;
  bool ignore = false;
};

struct ToleranceSpec {
  std::map<std::string, FieldTolerance> fields;
  /// Used for metric paths without an entry.
  FieldTolerance fallback;

  static ToleranceSpec from_json(const Json& j);
};

struct DiffEntry {
  std::string field;
  std::string left;
  std::string right;
  double difference = 0.0;
  double allowed = 0.0;
};

/// Metric fields that differ beyond their tolerance, plus verdict changes and
/// structural mismatches. Empty when the reports agree.
std::vector<DiffEntry> compare(const ExperimentReport& a, const ExperimentReport& b,
                               const ToleranceSpec& tolerances = {});

/// One "field,value" row per scalar metric (arrays joined by ';').
void write_report_csv(std::ostream& out, const ExperimentReport& report);

}  // namespace torusdiff
