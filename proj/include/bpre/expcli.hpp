#pragma once

#include <cstdint>
#include <exception>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "bpre/environment.hpp"
#include "bpre/stats.hpp"

namespace bpre {

using json = nlohmann::json;

inline constexpr const char* kVersion = "0.1.0";

enum class OutputFormat { json, csv };
std::string to_string(OutputFormat f);
OutputFormat parse_output_format(const std::string& name);

// Operations accepted by run(); "rwalk.tail", "rwalk.occupation" and
// "rwalk.reflected" are the random-walk ones.
std::vector<std::string> operation_names();

struct ExperimentConfig {
  json model;  // builtin name, {"builtin", "f2_ratio"} or {"components": [...]}; null when the operation needs none
  std::string operation;
  json params = json::object();
  std::uint64_t seed = 0;
  std::uint64_t reps = 10'000;
  std::optional<Method> method;
  std::vector<std::string> checks;
  std::optional<std::string> output_path;
  OutputFormat format = OutputFormat::json;

  friend bool operator==(const ExperimentConfig&, const ExperimentConfig&) = default;
};

// Law forms: {"lf": {"A": a, "B": b}} or {"fs": [p0, p1, ...]}. `path` prefixes error fields.
OffspringLaw parse_law(const json& j, const std::string& path);
json law_to_json(const OffspringLaw& law);
EnvironmentModel parse_model(const json& j, const std::string& path = "model");
// Canonical {"components": [...]} form.
json model_to_json(const EnvironmentModel& model);
// FNV-1a 64 of the canonical model JSON, as 16 hex digits.
std::string model_hash(const EnvironmentModel& model);

// Rejects unknown keys, a missing seed and malformed fields, naming the field path.
ExperimentConfig parse_config(const json& j);
ExperimentConfig load_config(const std::string& path);
json config_to_json(const ExperimentConfig& cfg);

struct EstimateRecord {
  std::string estimand;
  double value = 0.0;
  double std_error = 0.0;
  std::uint64_t reps = 0;
  std::string method;  // Method name, or "exact" for closed-form or enumerated values
};

struct CheckRecord {
  std::string name;
  bool passed = false;
  std::string detail;
};

struct RunReport {
  ExperimentConfig config;  // with every parameter default filled in
  json resolved_model;      // null when the operation needs no model
  std::string model_hash;
  std::string version = kVersion;
  std::vector<EstimateRecord> estimates;
  json result;  // operation-specific structured output
  std::vector<CheckRecord> checks;
  double wall_seconds = 0.0;
};

// Validates every parameter before any computation, then dispatches.
// Library validation errors are rethrown with the config field path.
RunReport run(const ExperimentConfig& cfg);

json report_to_json(const RunReport& report);
// Columns: estimand, value, std_error, reps, method, model_hash, seed.
std::string report_to_csv(const RunReport& report);
std::string render_report(const RunReport& report);  // in report.config.format

// 2 validation, 3 conditioning starvation, 4 population cap, 1 anything else.
int exit_code_for(const std::exception& e);

}  // namespace bpre
