#include <cstdio>
#include <fstream>
#include <sstream>

#include "bpre/errors.hpp"
#include "bpre/expcli.hpp"
#include "doctest.h"

using namespace bpre;

namespace {

std::string failing_field(const json& j) {
  try {
    run(parse_config(j));
  } catch (const ValidationError& e) {
    return e.field();
  }
  return "<none>";
}

}  // namespace

TEST_CASE("regime report for the SS reference model") {
  const auto report = run(parse_config({{"model", "ss-ref"}, {"operation", "regime"}, {"seed", 1}}));
  CHECK(report.result["regime"] == "SS");
  CHECK(report.result["gamma"].get<double>() == doctest::Approx(0.375).epsilon(1e-15));
  CHECK(report.version == kVersion);
  CHECK(report.resolved_model.contains("components"));
  CHECK(report.model_hash.size() == 16);
}

TEST_CASE("same config and seed reproduce every value") {
  const json j = {{"model", "ws-ref"}, {"operation", "survival"}, {"seed", 42}, {"reps", 3000},
                  {"params", {{"k", 2}, {"n", 15}}}};
  const auto a = run(parse_config(j));
  const auto b = run(parse_config(j));
  REQUIRE(a.estimates.size() == b.estimates.size());
  for (std::size_t i = 0; i < a.estimates.size(); ++i) {
    CHECK(a.estimates[i].value == b.estimates[i].value);
    CHECK(a.estimates[i].std_error == b.estimates[i].std_error);
  }
  CHECK(report_to_csv(a) == report_to_csv(b));
  // the echoed config reruns to the same numbers
  const auto c = run(parse_config(config_to_json(a.config)));
  CHECK(c.estimates[0].value == a.estimates[0].value);
}

TEST_CASE("config round trip") {
  const json j = {{"model", "is-ref"}, {"operation", "lineages"}, {"seed", 7}, {"reps", 2000},
                  {"method", "tilted-IS"}, {"checks", json::array()}, {"format", "csv"},
                  {"params", {{"k", 3}, {"n", 10}}}};
  const auto report = run(parse_config(j));
  CHECK(parse_config(config_to_json(report.config)) == report.config);
  CHECK(report.config.params.contains("k"));
  const auto plain = parse_config(j);
  CHECK(parse_config(config_to_json(plain)) == plain);
}

TEST_CASE("validation errors name the field") {
  const json survival = {{"model", "ss-ref"}, {"operation", "survival"}, {"seed", 1}};
  json j = {{"model", "ss-ref"}, {"operation", "survival"}, {"params", {{"n", 5}}}};
  CHECK(failing_field(j) == "seed");
  j = {{"model", "ss-ref"}, {"operation", "nope"}, {"seed", 1}};
  CHECK(failing_field(j) == "operation");
  j = survival;
  j["params"] = {{"n", 5}, {"bogus", 1}};
  CHECK(failing_field(j) == "params.bogus");
  j["params"] = {{"k", 0}, {"n", 5}};
  CHECK(failing_field(j) == "params.k");
  j = survival;
  j["method"] = "fast";
  CHECK(failing_field(j) == "method");
  j = survival;
  j.erase("model");
  CHECK(failing_field(j) == "model");
  j = {{"model", "ss-ref"}, {"operation", "regime"}, {"seed", 1}, {"extra", true}};
  CHECK(failing_field(j) == "extra");

  json light = {{"law", {{"lf", {{"A", 0.2}, {"B", 0.5}}}}}, {"weight", 0.4}};
  j = {{"operation", "regime"}, {"seed", 1}};
  j["model"] = {{"components", json::array({light})}};
  CHECK(failing_field(j) == "model.components");
  json bad_law = {{"law", {{"fs", {0.5, 0.6}}}}, {"weight", 1.0}};
  j["model"] = {{"components", json::array({bad_law})}};
  CHECK(failing_field(j).rfind("model.components[0].law", 0) == 0);
}

TEST_CASE("model JSON and hash") {
  const auto ss = reference_model("ss-ref");
  const auto j = model_to_json(ss);
  CHECK(parse_model(j) == ss);
  CHECK(model_hash(ss) == model_hash(parse_model(j)));
  CHECK(model_hash(ss) != model_hash(reference_model("ws-ref")));
  CHECK(model_hash(ss) != model_hash(reference_model("ss-ref", 2.0)));
  const auto fs = parse_law({{"fs", {0.75, 0.0, 0.25}}}, "law");
  CHECK(fs.pgf(0.5) == doctest::Approx(0.8125));
  CHECK(law_to_json(fs) == json({{"fs", {0.75, 0.0, 0.25}}}));
}

TEST_CASE("csv output") {
  const auto report =
      run(parse_config({{"model", "ss-ref"}, {"operation", "survival"}, {"seed", 3}, {"reps", 1000},
                        {"format", "csv"}, {"params", {{"k", 1}, {"n", 8}}}}));
  const auto csv = render_report(report);
  std::istringstream in(csv);
  std::string header, row;
  std::getline(in, header);
  std::getline(in, row);
  CHECK(header == "estimand,value,std_error,reps,method,model_hash,seed");
  CHECK(row.find(report.model_hash) != std::string::npos);
  CHECK(row.find(",3") != std::string::npos);
}

TEST_CASE("checks are reported") {
  const auto report =
      run(parse_config({{"model", "ss-ref"}, {"operation", "survival"}, {"seed", 4}, {"reps", 20'000},
                        {"checks", {"exact-oracle"}}, {"params", {{"k", 2}, {"n", 10}}}}));
  REQUIRE(report.checks.size() == 1);
  CHECK(report.checks[0].passed);
}

TEST_CASE("exit codes") {
  CHECK(exit_code_for(ValidationError("seed", "missing")) == 2);
  CHECK(exit_code_for(NotSubcriticalError(0.1)) == 2);
  CHECK(exit_code_for(ConditioningStarvation("few")) == 3);
  CHECK(exit_code_for(PopulationCapError("big")) == 4);
  CHECK(exit_code_for(std::runtime_error("other")) == 1);
}

TEST_CASE("config files") {
  const std::string path = "expcli_test_config.json";
  {
    std::ofstream out(path);
    out << R"({"model": "ws-ref", "operation": "regime", "seed": 9})";
  }
  const auto cfg = load_config(path);
  CHECK(cfg.seed == 9);
  CHECK(cfg.operation == "regime");
  std::remove(path.c_str());
  CHECK_THROWS_AS(load_config("does-not-exist.json"), ValidationError);
  for (const auto& op : operation_names()) CHECK_FALSE(op.empty());
  CHECK(parse_output_format("csv") == OutputFormat::csv);
  CHECK_THROWS_AS(parse_output_format("xml"), ValidationError);
}
