// bpre command-line front end.
#include <fstream>
#include <functional>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "bpre/acceptance.hpp"
#include "bpre/errors.hpp"
#include "bpre/expcli.hpp"

namespace {

using bpre::json;

json read_json_file(const std::string& path, const std::string& field) {
  std::ifstream in(path);
  if (!in) throw bpre::ValidationError(field, "cannot open '" + path + "'");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw bpre::ValidationError(field, "'" + path + "' is not valid JSON: " + e.what());
  }
}

// --model accepts a builtin name or a path to a JSON model file.
json model_arg(const std::string& value) {
  for (const auto& name : bpre::reference_model_names())
    if (value == name) return value;
  return read_json_file(value, "model");
}

struct Invocation {
  std::string operation;
  json params = json::object();
  std::string model;
  std::uint64_t seed = 0;
  std::uint64_t reps = 10'000;
  std::string method;
  std::string out = "json";
  std::string output;
  std::vector<std::string> checks;
  std::string env_file;
};

template <class T>
void param(CLI::App* app, Invocation& inv, const std::string& flag, const std::string& key, const std::string& help) {
  app->add_option_function<T>(flag, [&inv, key](const T& v) { inv.params[key] = v; }, help);
}

template <class T>
void list_param(CLI::App* app, Invocation& inv, const std::string& flag, const std::string& key,
                const std::string& help) {
  app->add_option_function<std::vector<T>>(flag, [&inv, key](const std::vector<T>& v) { inv.params[key] = v; }, help)
      ->delimiter(',');
}

void common(CLI::App* app, Invocation& inv, bool stochastic) {
  app->add_option("--model", inv.model, "builtin name (ss-ref, is-ref, ws-ref) or JSON model file")->required();
  if (stochastic) {
    app->add_option("--seed", inv.seed, "64-bit seed")->required();
    app->add_option("--reps", inv.reps, "replicates")->capture_default_str();
    app->add_option("--method", inv.method, "direct-sim, env-exact, tilted-IS or exact-enum");
    app->add_option("--check", inv.checks, "invariant check to run and report");
  }
  app->add_option("--out", inv.out, "csv or json")->check(CLI::IsMember({"csv", "json"}))->capture_default_str();
  app->add_option("--output", inv.output, "write the report here instead of stdout");
}

CLI::App* op(CLI::App& parent, Invocation& inv, const std::string& name, const std::string& operation,
             const std::string& help, bool stochastic = true) {
  auto* sub = parent.add_subcommand(name, help);
  sub->callback([&inv, operation] { inv.operation = operation; });
  common(sub, inv, stochastic);
  return sub;
}

bpre::ExperimentConfig to_config(const Invocation& inv) {
  json j = {{"operation", inv.operation}, {"seed", inv.seed}, {"reps", inv.reps},
            {"params", inv.params},       {"format", inv.out}, {"checks", inv.checks}};
  if (!inv.model.empty()) j["model"] = model_arg(inv.model);
  if (!inv.method.empty()) j["method"] = inv.method;
  if (!inv.output.empty()) j["output"] = inv.output;
  return bpre::parse_config(j);
}

void emit(const bpre::RunReport& report) {
  for (const auto& c : report.checks)
    std::cerr << "check " << c.name << ": " << (c.passed ? "PASS" : "FAIL") << " (" << c.detail << ")" << std::endl;
  const auto text = bpre::render_report(report);
  if (report.config.output_path) {
    std::ofstream out(*report.config.output_path);
    if (!out) throw bpre::ValidationError("output", "cannot write '" + *report.config.output_path + "'");
    out << text;
  } else {
    std::cout << text;
  }
}

int run_acceptance(const std::string& suite, std::uint64_t seed) {
  bpre::AcceptanceOptions opts;
  opts.seed = seed;
  bool ok = true;
  const auto results = bpre::run_acceptance(suite, opts, [&](const bpre::CriterionResult& r) {
    std::cout << bpre::format_result(r) << std::endl;
    if (!r.report_only && !r.passed) ok = false;
  });
  int passed = 0, total = 0;
  for (const auto& r : results)
    if (!r.report_only) {
      ++total;
      passed += r.passed ? 1 : 0;
    }
  std::cout << "summary: " << passed << "/" << total << " criteria passed (" << suite << ")" << std::endl;
  return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Subcritical branching processes in random environment"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(bpre::kVersion));
  Invocation inv;

  auto* regime = op(app, inv, "regime", "regime", "classify a model and solve for alpha, gamma", false);
  param<unsigned>(regime, inv, "--k", "k", "start particles for the k-particle rate");

  auto* quenched = app.add_subcommand("quenched", "quenched survival of a fixed environment");
  quenched->add_option("--env", inv.env_file, "JSON file {\"laws\": [...]}")->required();
  param<unsigned>(quenched, inv, "--k", "k", "start particles");
  quenched->add_option("--check", inv.checks, "closed-form");
  quenched->add_option("--out", inv.out, "csv or json")->check(CLI::IsMember({"csv", "json"}));
  quenched->add_option("--output", inv.output, "write the report here instead of stdout");
  quenched->callback([&inv] { inv.operation = "quenched"; });

  for (const auto& [name, help] : std::vector<std::pair<std::string, std::string>>{
           {"survival", "annealed survival P_k(Z_n > 0)"},
           {"jointsurv", "joint survival of all k lineages"},
           {"lineages", "law of the number of surviving lineages given survival"}}) {
    auto* sub = op(app, inv, name, name, help);
    param<unsigned>(sub, inv, "--k", "k", "start particles");
    param<std::uint64_t>(sub, inv, "--n", "n", "generations");
  }
  auto* alphak = op(app, inv, "alphak", "alphak", "ratio P_k(Z_n>0) / P_1(Z_n>0)");
  list_param<unsigned>(alphak, inv, "--k", "k", "comma-separated start sizes");
  list_param<std::uint64_t>(alphak, inv, "--n", "n", "comma-separated horizons");
  auto* envsel = op(app, inv, "envsel", "envsel", "P(p(f_n) >= eps | Z_n > 0)");
  param<unsigned>(envsel, inv, "--k", "k", "start particles");
  param<std::uint64_t>(envsel, inv, "--n", "n", "generations");
  list_param<double>(envsel, inv, "--eps", "epsilon", "comma-separated thresholds");

  auto* rwalk = app.add_subcommand("rwalk", "random walk of log means");
  rwalk->require_subcommand(1);
  auto* tail = op(*rwalk, inv, "tail", "rwalk.tail", "P(L_n >= -x)");
  param<std::uint64_t>(tail, inv, "--n", "n", "steps");
  param<double>(tail, inv, "--x", "x", "barrier depth");
  auto* occupation = op(*rwalk, inv, "occupation", "rwalk.occupation", "P(N_n(k) >= l | L_n >= -x)");
  param<std::uint64_t>(occupation, inv, "--n", "n", "steps");
  param<std::uint64_t>(occupation, inv, "--level", "level", "occupation level k");
  list_param<std::uint64_t>(occupation, inv, "--l", "l", "comma-separated thresholds");
  param<double>(occupation, inv, "--x", "x", "barrier depth");
  auto* reflected = op(*rwalk, inv, "reflected", "rwalk.reflected", "reflected exponential sums");
  list_param<std::uint64_t>(reflected, inv, "--n", "n", "comma-separated horizons");
  list_param<double>(reflected, inv, "--x", "x", "comma-separated barrier depths");

  auto* yaglom = op(app, inv, "yaglom", "yaglom", "law of Z_n given Z_n > 0");
  param<unsigned>(yaglom, inv, "--k", "k", "start particles");
  param<std::uint64_t>(yaglom, inv, "--n", "n", "generations");
  param<std::uint64_t>(yaglom, inv, "--cap", "cap", "largest state tabulated");
  auto* qprocess = op(app, inv, "qprocess", "qprocess", "trajectories of the process conditioned on long survival");
  param<unsigned>(qprocess, inv, "--k", "k", "start particles");
  param<std::uint64_t>(qprocess, inv, "--n", "horizon", "horizon");
  param<std::uint64_t>(qprocess, inv, "--lookahead", "lookahead", "extra generations of survival (WS)");
  param<std::uint64_t>(qprocess, inv, "--cap", "cap", "largest state tabulated");
  param<std::uint64_t>(qprocess, inv, "--population-cap", "population_cap", "largest population simulated");
  auto* envpost = op(app, inv, "envpost", "envpost", "environment posterior given survival");
  param<unsigned>(envpost, inv, "--k", "k", "start particles");
  param<std::uint64_t>(envpost, inv, "--p", "p", "number of leading generations");
  param<std::uint64_t>(envpost, inv, "--n", "n", "further generations of survival");

  std::string config_path;
  auto* run = app.add_subcommand("run", "run an experiment config file");
  run->add_option("--config", config_path, "JSON experiment config")->required();
  run->callback([&inv] { inv.operation = "run"; });

  std::string suite;
  std::uint64_t acceptance_seed = bpre::AcceptanceOptions{}.seed;
  auto* acceptance = app.add_subcommand("acceptance", "run the acceptance suite");
  acceptance->add_option("suite", suite, "fast or full")->required();
  acceptance->add_option("--seed", acceptance_seed, "base seed")->capture_default_str();
  acceptance->callback([&inv] { inv.operation = "acceptance"; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (inv.operation == "acceptance") {
      if (suite != "fast" && suite != "full") throw bpre::ValidationError("suite", "expected 'fast' or 'full'");
      return run_acceptance(suite, acceptance_seed);
    }
    if (inv.operation == "run") {
      emit(bpre::run(bpre::load_config(config_path)));
      return 0;
    }
    if (inv.operation == "quenched") {
      const json file = read_json_file(inv.env_file, "env");
      if (!file.is_object() || !file.contains("laws")) throw bpre::ValidationError("env", "expected {\"laws\": [...]}");
      inv.params["env"] = file["laws"];
    }
    emit(bpre::run(to_config(inv)));
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return bpre::exit_code_for(e);
  }
}
