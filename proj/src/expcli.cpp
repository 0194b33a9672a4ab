#include "bpre/expcli.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <functional>
#include <iomanip>
#include <limits>
#include <map>
#include <set>
#include <sstream>

#include "bpre/errors.hpp"
#include "bpre/lfexact.hpp"
#include "bpre/limits.hpp"
#include "bpre/regime.hpp"
#include "bpre/rwalk.hpp"
#include "bpre/sampler.hpp"
#include "bpre/simcore.hpp"

namespace bpre {

namespace {

std::string join_path(const std::string& a, const std::string& b) {
  if (a.empty()) return b;
  if (b.empty()) return a;
  return b.front() == '[' ? a + b : a + "." + b;
}

// Message of a ValidationError without its "field: " prefix.
std::string bare_message(const ValidationError& e) {
  const std::string what = e.what();
  const std::string prefix = e.field() + ": ";
  return !e.field().empty() && what.rfind(prefix, 0) == 0 ? what.substr(prefix.size()) : what;
}

template <class F>
auto with_prefix(const std::string& path, F&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const NotSubcriticalError&) {
    throw;
  } catch (const ValidationError& e) {
    throw ValidationError(join_path(path, e.field()), bare_message(e));
  }
}

double require_number(const json& j, const std::string& path) {
  if (!j.is_number()) throw ValidationError(path, "expected a number");
  const double v = j.get<double>();
  if (!std::isfinite(v)) throw ValidationError(path, "expected a finite number");
  return v;
}

std::uint64_t require_uint(const json& j, const std::string& path) {
  if (j.is_number_unsigned()) return j.get<std::uint64_t>();
  if (j.is_number_integer()) {
    if (j.get<std::int64_t>() < 0) throw ValidationError(path, "expected a non-negative integer");
    return static_cast<std::uint64_t>(j.get<std::int64_t>());
  }
  throw ValidationError(path, "expected a non-negative integer");
}

const std::string& require_string(const json& j, const std::string& path) {
  if (!j.is_string()) throw ValidationError(path, "expected a string");
  return j.get_ref<const std::string&>();
}

void reject_unknown(const json& obj, const std::set<std::string>& allowed, const std::string& path) {
  for (auto it = obj.begin(); it != obj.end(); ++it)
    if (!allowed.count(it.key())) throw ValidationError(join_path(path, it.key()), "unknown field");
}

// Reads operation parameters, filling defaults and recording the resolved values.
class ParamReader {
 public:
  explicit ParamReader(const json& params) : in_(params) {
    if (!in_.is_object()) throw ValidationError("params", "expected an object");
  }

  std::uint64_t uint(const std::string& key, std::optional<std::uint64_t> def, std::uint64_t lo,
                     std::uint64_t hi = std::numeric_limits<std::uint64_t>::max()) {
    const auto path = "params." + key;
    std::uint64_t v;
    if (in_.contains(key)) {
      v = require_uint(in_[key], path);
    } else if (def) {
      v = *def;
    } else {
      throw ValidationError(path, "required");
    }
    check_range(double(v), double(lo), double(hi), path);
    out_[key] = v;
    return v;
  }

  double real(const std::string& key, std::optional<double> def, double lo, double hi) {
    const auto path = "params." + key;
    double v;
    if (in_.contains(key)) {
      v = require_number(in_[key], path);
    } else if (def) {
      v = *def;
    } else {
      throw ValidationError(path, "required");
    }
    check_range(v, lo, hi, path);
    out_[key] = v;
    return v;
  }

  std::vector<std::uint64_t> uints(const std::string& key, std::optional<std::vector<std::uint64_t>> def,
                                   std::uint64_t lo, std::uint64_t hi) {
    const auto path = "params." + key;
    std::vector<std::uint64_t> v;
    if (in_.contains(key)) {
      const auto& arr = in_[key];
      if (!arr.is_array() || arr.empty()) throw ValidationError(path, "expected a non-empty list");
      for (std::size_t i = 0; i < arr.size(); ++i) v.push_back(require_uint(arr[i], path + "[" + std::to_string(i) + "]"));
    } else if (def) {
      v = *def;
    } else {
      throw ValidationError(path, "required");
    }
    for (std::size_t i = 0; i < v.size(); ++i)
      check_range(double(v[i]), double(lo), double(hi), path + "[" + std::to_string(i) + "]");
    out_[key] = v;
    return v;
  }

  std::vector<double> reals(const std::string& key, std::optional<std::vector<double>> def, double lo, double hi) {
    const auto path = "params." + key;
    std::vector<double> v;
    if (in_.contains(key)) {
      const auto& arr = in_[key];
      if (!arr.is_array() || arr.empty()) throw ValidationError(path, "expected a non-empty list");
      for (std::size_t i = 0; i < arr.size(); ++i) v.push_back(require_number(arr[i], path + "[" + std::to_string(i) + "]"));
    } else if (def) {
      v = *def;
    } else {
      throw ValidationError(path, "required");
    }
    for (std::size_t i = 0; i < v.size(); ++i) check_range(v[i], lo, hi, path + "[" + std::to_string(i) + "]");
    out_[key] = v;
    return v;
  }

  const json& raw(const std::string& key) {
    if (!in_.contains(key)) throw ValidationError("params." + key, "required");
    out_[key] = in_[key];
    return in_[key];
  }

  // Rejects parameters nobody read; returns the resolved parameter object.
  json finish() const {
    for (auto it = in_.begin(); it != in_.end(); ++it)
      if (!out_.contains(it.key())) throw ValidationError("params." + it.key(), "unknown parameter");
    return out_;
  }

 private:
  static void check_range(double v, double lo, double hi, const std::string& path) {
    if (v < lo || v > hi) {
      std::ostringstream os;
      os << "must lie in [" << lo << ", " << hi << "], got " << v;
      throw ValidationError(path, os.str());
    }
  }
  const json& in_;
  json out_ = json::object();
};

std::string fmt_num(double v) {
  std::ostringstream os;
  os << std::setprecision(6) << v;
  return os.str();
}

std::string cell(const std::string& name, const std::vector<std::pair<std::string, std::string>>& args) {
  std::string s = name + "[";
  for (std::size_t i = 0; i < args.size(); ++i) s += (i ? ";" : "") + args[i].first + "=" + args[i].second;
  return s + "]";
}

std::string num(std::uint64_t v) { return std::to_string(v); }

struct Context {
  const ExperimentConfig& cfg;
  std::optional<EnvironmentModel> model;
  std::set<std::string> checks;
  RunReport& report;

  EstimatorConfig estimator() const { return EstimatorConfig{cfg.reps, cfg.seed, cfg.method, kDefaultChunk}; }

  const EnvironmentModel& need_model() const {
    if (!model) throw ValidationError("model", "required for operation '" + cfg.operation + "'");
    return *model;
  }
  void add(std::string estimand, double value, double se, std::uint64_t reps, std::string method) {
    report.estimates.push_back({std::move(estimand), value, se, reps, std::move(method)});
  }
  void add(const EstimateWithCI& e) { add(e.estimand, e.value, e.std_error, e.replicates, to_string(e.method)); }
  void check(std::string name, bool ok, std::string detail) {
    report.checks.push_back({std::move(name), ok, std::move(detail)});
  }
  bool wants(const std::string& name) const { return checks.count(name) > 0; }
};

// A spec of one operation: which checks it understands, a parameter reader that
// runs before any work, and the body.
struct Operation {
  bool needs_model;
  std::set<std::string> checks;
  std::function<std::function<void(Context&)>(ParamReader&)> prepare;
};

json regime_json(const RegimeReport& r) {
  json j = {{"subcritical", r.subcritical}, {"regime", to_string(r.regime)}, {"alpha", r.alpha},
            {"gamma", r.gamma},             {"e_log_m", r.e_log_m},          {"e_m_log_m", r.e_m_log_m},
            {"e_m", r.e_m}};
  if (r.k_particle) {
    j["k"] = r.k_particle->k;
    j["alpha_tilde_k"] = r.k_particle->alpha_tilde;
    j["gamma_tilde_k"] = r.k_particle->gamma_tilde;
    j["joint_case"] = to_string(r.k_particle->joint_case);
    j["e_m_k_log_m"] = r.k_particle->slope_at_k;
  }
  return j;
}

json estimate_json(const EstimateWithCI& e) {
  return {{"estimand", e.estimand}, {"value", e.value},   {"std_error", e.std_error},
          {"replicates", e.replicates}, {"method", to_string(e.method)}};
}

// Trims trailing zero cells of a pmf table (keeps index `keep` at least).
std::size_t last_nonzero(const std::vector<double>& v, std::size_t keep = 1) {
  std::size_t last = std::min(keep, v.empty() ? 0 : v.size() - 1);
  for (std::size_t i = 0; i < v.size(); ++i)
    if (v[i] != 0.0) last = std::max(last, i);
  return last;
}

double exact_annealed(const EnvironmentModel& model, unsigned k, std::size_t n) {
  double total = 0.0;
  for_each_env_sequence(model, n, [&](std::span<const std::uint32_t> idx, double prob) {
    const double p = std::exp(log_survival_by(n, [&](std::size_t i) -> const OffspringLaw& { return model.law(idx[i]); }));
    total += prob * at_least_one_survives(p, k);
  });
  return total;
}

constexpr std::uint64_t kOracleEnumLimit = std::uint64_t{1} << 20;

const std::map<std::string, Operation>& operations() {
  static const std::map<std::string, Operation> ops = {
      {"regime",
       {true, {}, [](ParamReader& p) -> std::function<void(Context&)> {
          const auto k = static_cast<unsigned>(p.uint("k", 1, 1, 1'000'000));
          return [k](Context& c) {
            const auto r = classify(c.need_model(), k);
            c.report.result = regime_json(r);
            c.add("alpha", r.alpha, 0.0, 0, "exact");
            c.add("gamma", r.gamma, 0.0, 0, "exact");
            c.add("E(log m)", r.e_log_m, 0.0, 0, "exact");
            c.add("E(m log m)", r.e_m_log_m, 0.0, 0, "exact");
            if (r.k_particle) {
              c.add(cell("alpha_tilde", {{"k", num(r.k_particle->k)}}), r.k_particle->alpha_tilde, 0.0, 0, "exact");
              c.add(cell("gamma_tilde", {{"k", num(r.k_particle->k)}}), r.k_particle->gamma_tilde, 0.0, 0, "exact");
            }
          };
        }}},
      {"quenched",
       {false, {"closed-form"}, [](ParamReader& p) -> std::function<void(Context&)> {
          const auto k = static_cast<unsigned>(p.uint("k", 1, 1, 1'000'000));
          const json& env_j = p.raw("env");
          if (!env_j.is_array()) throw ValidationError("params.env", "expected a list of laws");
          EnvSequence env;
          for (std::size_t i = 0; i < env_j.size(); ++i)
            env.push_back(parse_law(env_j[i], "params.env[" + std::to_string(i) + "]"));
          return [k, env](Context& c) {
            // The closed form is compared inside quenched_survival; the check reports the gap.
            const auto q = quenched_survival(env, k);
            json j = {{"n", q.n},
                      {"k", q.k},
                      {"p", q.p},
                      {"log_p", q.log_p},
                      {"all_survive", q.all_survive},
                      {"at_least_one", q.at_least_one}};
            if (q.closed_form_p) j["closed_form_p"] = *q.closed_form_p;
            c.report.result = j;
            const std::string n = num(q.n);
            c.add(cell("p", {{"n", n}}), q.p, 0.0, 0, "exact");
            c.add(cell("log_p", {{"n", n}}), q.log_p, 0.0, 0, "exact");
            c.add(cell("all_survive", {{"k", num(k)}, {"n", n}}), q.all_survive, 0.0, 0, "exact");
            c.add(cell("at_least_one", {{"k", num(k)}, {"n", n}}), q.at_least_one, 0.0, 0, "exact");
            if (c.wants("closed-form")) {
              if (q.closed_form_p) {
                const double gap = std::abs(*q.closed_form_p - q.p);
                c.check("closed-form", gap <= 1e-10, "|closed form - iteration| = " + fmt_num(gap));
              } else {
                c.check("closed-form", false, "environment is not all linear fractional");
              }
            }
          };
        }}},
      {"survival",
       {true, {"exact-oracle"}, [](ParamReader& p) -> std::function<void(Context&)> {
          const auto k = static_cast<unsigned>(p.uint("k", 1, 1, 1'000'000));
          const auto n = p.uint("n", std::nullopt, 0, 100'000);
          return [k, n](Context& c) {
            const auto& m = c.need_model();
            auto e = annealed_survival(m, k, n, c.estimator());
            c.add(e);
            c.report.result = estimate_json(e);
            if (c.wants("exact-oracle")) {
              if (env_sequence_count(m, n) > kOracleEnumLimit) {
                c.check("exact-oracle", false, "more than 2^20 environment sequences");
              } else {
                const double exact = exact_annealed(m, k, n);
                const double gap = std::abs(e.value - exact);
                const bool ok = e.std_error > 0.0 ? gap <= 4.0 * e.std_error : gap <= 1e-12;
                c.check("exact-oracle", ok, "exact " + fmt_num(exact) + ", estimate " + fmt_num(e.value) + " +- " +
                                                fmt_num(e.std_error));
              }
            }
          };
        }}},
      {"jointsurv",
       {true, {}, [](ParamReader& p) -> std::function<void(Context&)> {
          const auto k = static_cast<unsigned>(p.uint("k", 2, 1, 1'000'000));
          const auto n = p.uint("n", std::nullopt, 0, 100'000);
          return [k, n](Context& c) {
            auto e = joint_survival(c.need_model(), k, n, c.estimator());
            c.add(e);
            c.report.result = estimate_json(e);
          };
        }}},
      {"alphak",
       {true, {}, [](ParamReader& p) -> std::function<void(Context&)> {
          const auto ks64 = p.uints("k", std::vector<std::uint64_t>{2, 3}, 1, 1'000'000);
          const auto ns64 = p.uints("n", std::nullopt, 0, 100'000);
          std::vector<unsigned> ks(ks64.begin(), ks64.end());
          std::vector<std::size_t> ns(ns64.begin(), ns64.end());
          return [ks, ns](Context& c) {
            const auto curve = alpha_k_curve(c.need_model(), ks, ns, c.estimator());
            json pts = json::array();
            for (const auto& pt : curve.points) {
              c.add(cell("alpha_k", {{"k", num(pt.k)}, {"n", num(pt.n)}}), pt.value, pt.std_error, c.cfg.reps,
                    to_string(curve.method));
              pts.push_back({{"k", pt.k},
                             {"n", pt.n},
                             {"value", pt.value},
                             {"std_error", pt.std_error},
                             {"combined_se", pt.combined_se},
                             {"denominator_rel_se", pt.denominator_rel_se}});
            }
            c.report.result = {{"points", pts},
                               {"trend_slope", curve.trend_slope},
                               {"warnings", curve.warnings},
                               {"method", to_string(curve.method)}};
          };
        }}},
      {"lineages",
       {true, {}, [](ParamReader& p) -> std::function<void(Context&)> {
          const auto k = static_cast<unsigned>(p.uint("k", std::nullopt, 1, 1'000'000));
          const auto n = p.uint("n", std::nullopt, 0, 100'000);
          return [k, n](Context& c) {
            const auto d = conditional_lineage_counts(c.need_model(), k, n, c.estimator());
            for (std::size_t j = 1; j < d.pmf.size(); ++j)
              c.add(cell("P(N_n=j|Z_n>0)", {{"k", num(k)}, {"n", num(n)}, {"j", num(j)}}), d.pmf[j], d.std_error[j],
                    d.replicates, to_string(d.method));
            c.report.result = {{"pmf", d.pmf},
                               {"std_error", d.std_error},
                               {"replicates", d.replicates},
                               {"effective_events", d.effective_events},
                               {"method", to_string(d.method)}};
          };
        }}},
      {"envsel",
       {true, {}, [](ParamReader& p) -> std::function<void(Context&)> {
          const auto k = static_cast<unsigned>(p.uint("k", 1, 1, 1'000'000));
          const auto n = p.uint("n", std::nullopt, 0, 100'000);
          const auto eps = p.reals("epsilon", std::vector<double>{0.01}, 0.0, 1.0);
          return [k, n, eps](Context& c) {
            const auto s = conditional_env_survival(c.need_model(), k, n, eps, c.estimator());
            for (std::size_t i = 0; i < s.value.size(); ++i)
              c.add(cell("P(p>=eps|Z_n>0)", {{"k", num(k)}, {"n", num(n)}, {"eps", fmt_num(s.epsilon[i])}}),
                    s.value[i], s.std_error[i], s.replicates, to_string(s.method));
            c.report.result = {{"epsilon", s.epsilon},
                               {"value", s.value},
                               {"std_error", s.std_error},
                               {"replicates", s.replicates},
                               {"effective_events", s.effective_events},
                               {"method", to_string(s.method)}};
          };
        }}},
      {"rwalk.tail",
       {true, {"exact-oracle"}, [](ParamReader& p) -> std::function<void(Context&)> {
          const auto n = p.uint("n", std::nullopt, 0, 100'000);
          const auto x = p.real("x", 0.0, 0.0, 1e6);
          return [n, x](Context& c) {
            const auto law = step_law(c.need_model());
            const auto e = ln_tail(law, n, x, c.estimator());
            c.add(e);
            json j = estimate_json(e);
            if (c.wants("exact-oracle")) {
              const double exact = ln_tail_exact(law, n, x);
              j["exact"] = exact;
              c.add(e.estimand, exact, 0.0, 0, "exact");
              const double gap = std::abs(e.value - exact);
              const bool ok = e.std_error > 0.0 ? gap <= 4.0 * e.std_error : gap <= 1e-12;
              c.check("exact-oracle", ok,
                      "exact " + fmt_num(exact) + ", estimate " + fmt_num(e.value) + " +- " + fmt_num(e.std_error));
            }
            c.report.result = j;
          };
        }}},
      {"rwalk.occupation",
       {true, {}, [](ParamReader& p) -> std::function<void(Context&)> {
          const auto n = p.uint("n", std::nullopt, 0, 100'000);
          const auto level = p.uint("level", 0, 0, 1'000'000);
          const auto ls = p.uints("l", std::vector<std::uint64_t>{1, 2, 4, 8, 16}, 0, 1'000'000);
          const auto x = p.real("x", 1.0, 0.0, 1e6);
          return [n, level, ls, x](Context& c) {
            const auto law = step_law(c.need_model());
            const auto o = occupation_curve(law, n, static_cast<std::int64_t>(level), ls, x, c.estimator());
            for (std::size_t i = 0; i < o.l.size(); ++i)
              c.add(cell("P(N_n(k)>=l|L_n>=-x)",
                         {{"n", num(n)}, {"k", num(level)}, {"l", num(o.l[i])}, {"x", fmt_num(x)}}),
                    o.value[i], o.std_error[i], o.replicates, to_string(o.method));
            json j = {{"l", o.l},
                      {"value", o.value},
                      {"std_error", o.std_error},
                      {"replicates", o.replicates},
                      {"effective_events", o.effective_events},
                      {"method", to_string(o.method)}};
            if (o.loglog)
              j["loglog"] = {{"slope", o.loglog->slope}, {"slope_se", o.loglog->slope_se},
                             {"intercept", o.loglog->intercept}, {"r_squared", o.loglog->r_squared}};
            c.report.result = j;
          };
        }}},
      {"rwalk.reflected",
       {true, {}, [](ParamReader& p) -> std::function<void(Context&)> {
          const auto ns64 = p.uints("n", std::vector<std::uint64_t>{5, 10, 15, 20}, 0, 100'000);
          const auto xs = p.reals("x", std::vector<double>{0, 1, 2}, 0.0, 1e6);
          std::vector<std::size_t> ns(ns64.begin(), ns64.end());
          return [ns, xs](Context& c) {
            const auto r = reflected_sum_check(step_law(c.need_model()), ns, xs, c.estimator());
            json cells = json::array();
            for (const auto& rc : r.cells) {
              cells.push_back({{"n", rc.n},
                               {"x", rc.x},
                               {"probability", rc.probability},
                               {"std_error", rc.std_error},
                               {"effective_events", rc.effective_events}});
              for (std::size_t b = 0; b < r.beta_grid.size(); ++b)
                c.add(cell("P(R<=beta|L_n>=-x)", {{"n", num(rc.n)}, {"x", fmt_num(rc.x)}, {"beta", fmt_num(r.beta_grid[b])}}),
                      rc.probability[b], rc.std_error[b], c.cfg.reps, to_string(r.method));
            }
            c.report.result = {{"beta_grid", r.beta_grid},
                               {"beta_hat", r.beta_hat ? json(*r.beta_hat) : json(nullptr)},
                               {"cells", cells},
                               {"method", to_string(r.method)}};
          };
        }}},
      {"yaglom",
       {true, {"functional-equation"}, [](ParamReader& p) -> std::function<void(Context&)> {
          const auto k = static_cast<unsigned>(p.uint("k", 1, 1, 1'000'000));
          const auto n = p.uint("n", std::nullopt, 0, 100'000);
          const auto cap = p.uint("cap", kDefaultStateCap, 1, std::uint64_t{1} << 24);
          return [k, n, cap](Context& c) {
            const auto& m = c.need_model();
            const auto y = yaglom(m, k, n, c.estimator(), cap);
            const auto last = last_nonzero(y.pmf);
            for (std::size_t j = 1; j <= last; ++j)
              c.add(cell("P(Z_n=j|Z_n>0)", {{"k", num(k)}, {"n", num(n)}, {"j", num(j)}}), y.pmf[j], y.std_error[j],
                    y.replicates, to_string(y.method));
            c.add(cell("P(Z_n>cap|Z_n>0)", {{"k", num(k)}, {"n", num(n)}, {"cap", num(cap)}}), y.tail_mass, 0.0,
                  y.replicates, to_string(y.method));
            const std::vector<double> pmf(y.pmf.begin(), y.pmf.begin() + last + 1);
            const std::vector<double> se(y.std_error.begin(), y.std_error.begin() + last + 1);
            json j = {{"pmf", pmf},        {"std_error", se},          {"tail_mass", y.tail_mass},
                      {"s_grid", y.s_grid}, {"pgf", y.pgf},             {"pgf_se", y.pgf_se},
                      {"replicates", y.replicates}, {"effective_events", y.effective_events},
                      {"method", to_string(y.method)}};
            if (c.wants("functional-equation")) {
              const auto r = classify(m);
              const auto res = functional_residual(y, m, r.gamma);
              j["functional_residual"] = res.residual;
              c.check("functional-equation", res.max_residual <= 0.02,
                      "max residual " + fmt_num(res.max_residual) + " (threshold 0.02)");
            }
            c.report.result = j;
          };
        }}},
      {"qprocess",
       {true, {"kernel-rows"}, [](ParamReader& p) -> std::function<void(Context&)> {
          const auto k = static_cast<unsigned>(p.uint("k", 1, 1, 1'000'000));
          const auto horizon = p.uint("horizon", std::nullopt, 0, 100'000);
          const auto lookahead = p.uint("lookahead", kWsLookahead, 0, 100'000);
          const auto cap = p.uint("cap", kDefaultStateCap, 1, std::uint64_t{1} << 24);
          const auto population_cap = p.uint("population_cap", kDefaultPopulationCap, 1, std::uint64_t{1} << 40);
          return [k, horizon, lookahead, cap, population_cap](Context& c) {
            const auto& m = c.need_model();
            const auto q = qprocess_run(m, k, horizon, c.estimator(), lookahead, cap, population_cap);
            const std::string method = to_string(q.method);
            for (std::size_t t = 0; t < q.median.size(); ++t) {
              c.add(cell("median(Y_t)", {{"k", num(k)}, {"t", num(t)}}), q.median[t], 0.0, q.replicates, method);
              c.add(cell("mean(Y_t)", {{"k", num(k)}, {"t", num(t)}}), q.mean[t], 0.0, q.replicates, method);
            }
            const auto last = last_nonzero(q.pmf);
            for (std::size_t j = 1; j <= last; ++j)
              c.add(cell("P(Y_h=j)", {{"k", num(k)}, {"h", num(horizon)}, {"j", num(j)}}), q.pmf[j], q.std_error[j],
                    q.replicates, method);
            c.report.result = {{"regime", to_string(q.regime)},
                               {"approximation", q.approximation},
                               {"lookahead", q.lookahead},
                               {"median", q.median},
                               {"mean", q.mean},
                               {"pmf", std::vector<double>(q.pmf.begin(), q.pmf.begin() + last + 1)},
                               {"std_error", std::vector<double>(q.std_error.begin(), q.std_error.begin() + last + 1)},
                               {"tail_mass", q.tail_mass},
                               {"replicates", q.replicates},
                               {"effective_events", q.effective_events},
                               {"method", method}};
            if (c.wants("kernel-rows")) {
              double worst = 0.0;
              for (std::uint64_t l = 1; l <= 10; ++l) {
                const auto row = qprocess_kernel(m, l, cap);
                double sum = row.tail_mass;
                for (double v : row.prob) sum += v;
                worst = std::max(worst, std::abs(1.0 - sum));
              }
              c.check("kernel-rows", worst <= 1e-10, "rows l=1..10 sum to 1 within " + fmt_num(worst));
            }
          };
        }}},
      {"envpost",
       {true, {}, [](ParamReader& p) -> std::function<void(Context&)> {
          const auto k = static_cast<unsigned>(p.uint("k", 1, 1, 1'000'000));
          const auto pos = p.uint("p", 1, 1, 5);
          const auto n = p.uint("n", std::nullopt, 0, 100'000);
          return [k, pos, n](Context& c) {
            const auto e = env_posterior(c.need_model(), k, pos, n, c.estimator());
            const std::string method = to_string(e.method);
            for (std::size_t i = 0; i < e.marginal.size(); ++i)
              for (std::size_t comp = 0; comp < e.marginal[i].size(); ++comp)
                c.add(cell("P(f_i=c|Z>0)", {{"k", num(k)}, {"i", num(i)}, {"c", num(comp)}}), e.marginal[i][comp],
                      e.marginal_se[i][comp], e.replicates, method);
            c.report.result = {{"marginal", e.marginal}, {"marginal_se", e.marginal_se},
                               {"joint", e.joint},       {"joint_se", e.joint_se},
                               {"prior", e.prior},       {"replicates", e.replicates},
                               {"effective_events", e.effective_events}, {"method", method}};
          };
        }}},
  };
  return ops;
}

const std::set<std::string> kTopLevelFields = {"model", "operation", "params", "seed", "reps",
                                               "method", "checks", "output", "format"};

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char ch : s) out += ch == '"' ? std::string("\"\"") : std::string(1, ch);
  return out + "\"";
}

}  // namespace

std::string to_string(OutputFormat f) { return f == OutputFormat::csv ? "csv" : "json"; }

OutputFormat parse_output_format(const std::string& name) {
  if (name == "json") return OutputFormat::json;
  if (name == "csv") return OutputFormat::csv;
  throw ValidationError("format", "expected 'csv' or 'json', got '" + name + "'");
}

std::vector<std::string> operation_names() {
  std::vector<std::string> out;
  for (const auto& [name, op] : operations()) out.push_back(name);
  return out;
}

OffspringLaw parse_law(const json& j, const std::string& path) {
  if (!j.is_object() || j.size() != 1) throw ValidationError(path, "expected {\"lf\": {...}} or {\"fs\": [...]}");
  if (j.contains("lf")) {
    const auto& lf = j["lf"];
    const auto lf_path = path + ".lf";
    if (!lf.is_object()) throw ValidationError(lf_path, "expected an object with A and B");
    reject_unknown(lf, {"A", "B"}, lf_path);
    if (!lf.contains("A")) throw ValidationError(lf_path + ".A", "required");
    if (!lf.contains("B")) throw ValidationError(lf_path + ".B", "required");
    const double a = require_number(lf["A"], lf_path + ".A");
    const double b = require_number(lf["B"], lf_path + ".B");
    return with_prefix(lf_path, [&] { return OffspringLaw::linear_fractional(a, b); });
  }
  if (j.contains("fs")) {
    const auto& fs = j["fs"];
    const auto fs_path = path + ".fs";
    if (!fs.is_array()) throw ValidationError(fs_path, "expected a list of probabilities");
    std::vector<double> p;
    for (std::size_t i = 0; i < fs.size(); ++i) p.push_back(require_number(fs[i], fs_path + "[" + std::to_string(i) + "]"));
    return with_prefix(fs_path, [&] { return OffspringLaw::finite_support(std::move(p)); });
  }
  throw ValidationError(path, "expected {\"lf\": {...}} or {\"fs\": [...]}");
}

json law_to_json(const OffspringLaw& law) {
  if (law.is_linear_fractional()) return {{"lf", {{"A", law.lf().A}, {"B", law.lf().B}}}};
  const auto t = law.pmf_table();
  return {{"fs", std::vector<double>(t.begin(), t.end())}};
}

EnvironmentModel parse_model(const json& j, const std::string& path) {
  if (j.is_string()) return with_prefix(path, [&] { return reference_model(j.get<std::string>()); });
  if (!j.is_object()) throw ValidationError(path, "expected a builtin name or an object");
  if (j.contains("builtin")) {
    reject_unknown(j, {"builtin", "f2_ratio"}, path);
    const auto& name = require_string(j["builtin"], path + ".builtin");
    const double ratio = j.contains("f2_ratio") ? require_number(j["f2_ratio"], path + ".f2_ratio") : kDefaultF2Ratio;
    return with_prefix(path, [&] { return reference_model(name, ratio); });
  }
  reject_unknown(j, {"components"}, path);
  if (!j.contains("components")) throw ValidationError(path + ".components", "required");
  const auto& comps = j["components"];
  const auto comps_path = path + ".components";
  if (!comps.is_array()) throw ValidationError(comps_path, "expected a list");
  std::vector<Component> out;
  for (std::size_t i = 0; i < comps.size(); ++i) {
    const auto cp = comps_path + "[" + std::to_string(i) + "]";
    const auto& c = comps[i];
    if (!c.is_object()) throw ValidationError(cp, "expected {\"law\": ..., \"weight\": ...}");
    reject_unknown(c, {"law", "weight"}, cp);
    if (!c.contains("law")) throw ValidationError(cp + ".law", "required");
    if (!c.contains("weight")) throw ValidationError(cp + ".weight", "required");
    out.push_back({parse_law(c["law"], cp + ".law"), require_number(c["weight"], cp + ".weight")});
  }
  return with_prefix(path, [&] { return EnvironmentModel(std::move(out)); });
}

json model_to_json(const EnvironmentModel& model) {
  json comps = json::array();
  for (const auto& c : model.components()) comps.push_back({{"law", law_to_json(c.law)}, {"weight", c.weight}});
  return {{"components", comps}};
}

std::string model_hash(const EnvironmentModel& model) {
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << fnv1a(model_to_json(model).dump());
  return os.str();
}

ExperimentConfig parse_config(const json& j) {
  if (!j.is_object()) throw ValidationError("", "config must be a JSON object");
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!kTopLevelFields.count(it.key())) throw ValidationError(it.key(), "unknown field");
  ExperimentConfig cfg;
  if (!j.contains("operation")) throw ValidationError("operation", "required");
  cfg.operation = require_string(j["operation"], "operation");
  if (!operations().count(cfg.operation)) throw ValidationError("operation", "unknown operation '" + cfg.operation + "'");
  if (!j.contains("seed")) throw ValidationError("seed", "required (there is no wall-clock default)");
  cfg.seed = require_uint(j["seed"], "seed");
  if (j.contains("model") && !j["model"].is_null()) {
    cfg.model = j["model"];
    parse_model(cfg.model);
  }
  if (j.contains("params")) {
    if (!j["params"].is_object()) throw ValidationError("params", "expected an object");
    cfg.params = j["params"];
  }
  if (j.contains("reps")) {
    cfg.reps = require_uint(j["reps"], "reps");
    if (cfg.reps == 0) throw ValidationError("reps", "need at least one replicate");
  }
  if (j.contains("method") && !j["method"].is_null()) cfg.method = parse_method(require_string(j["method"], "method"));
  if (j.contains("checks")) {
    const auto& ch = j["checks"];
    if (!ch.is_array()) throw ValidationError("checks", "expected a list of names");
    const auto& known = operations().at(cfg.operation).checks;
    for (std::size_t i = 0; i < ch.size(); ++i) {
      const auto path = "checks[" + std::to_string(i) + "]";
      const auto& name = require_string(ch[i], path);
      if (!known.count(name)) throw ValidationError(path, "operation '" + cfg.operation + "' has no check '" + name + "'");
      cfg.checks.push_back(name);
    }
  }
  if (j.contains("output") && !j["output"].is_null()) cfg.output_path = require_string(j["output"], "output");
  if (j.contains("format")) cfg.format = parse_output_format(require_string(j["format"], "format"));
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("config", "cannot open '" + path + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ValidationError("config", std::string("not valid JSON: ") + e.what());
  }
  return parse_config(j);
}

json config_to_json(const ExperimentConfig& cfg) {
  json j = {{"operation", cfg.operation}, {"seed", cfg.seed},           {"reps", cfg.reps},
            {"params", cfg.params},       {"checks", cfg.checks},       {"format", to_string(cfg.format)}};
  if (!cfg.model.is_null()) j["model"] = cfg.model;
  if (cfg.method) j["method"] = to_string(*cfg.method);
  if (cfg.output_path) j["output"] = *cfg.output_path;
  return j;
}

RunReport run(const ExperimentConfig& cfg) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto it = operations().find(cfg.operation);
  if (it == operations().end()) throw ValidationError("operation", "unknown operation '" + cfg.operation + "'");
  const Operation& op = it->second;
  if (cfg.reps == 0) throw ValidationError("reps", "need at least one replicate");

  RunReport report;
  report.config = cfg;
  std::optional<EnvironmentModel> model;
  if (!cfg.model.is_null()) {
    model = parse_model(cfg.model);
    report.resolved_model = model_to_json(*model);
    report.model_hash = model_hash(*model);
  } else if (op.needs_model) {
    throw ValidationError("model", "required for operation '" + cfg.operation + "'");
  }
  std::set<std::string> checks;
  for (std::size_t i = 0; i < cfg.checks.size(); ++i) {
    if (!op.checks.count(cfg.checks[i]))
      throw ValidationError("checks[" + std::to_string(i) + "]", "unknown check '" + cfg.checks[i] + "'");
    checks.insert(cfg.checks[i]);
  }

  ParamReader reader(cfg.params);
  const auto body = op.prepare(reader);
  report.config.params = reader.finish();

  Context ctx{cfg, model, checks, report};
  try {
    body(ctx);
  } catch (const NotSubcriticalError&) {
    throw;
  } catch (const ValidationError& e) {
    static const std::set<std::string> top = {"model", "seed", "reps", "method", "checks", "operation"};
    const auto& f = e.field();
    const auto head = f.substr(0, f.find_first_of(".["));
    if (f.empty() || top.count(head) || head == "params") throw;
    throw ValidationError("params." + f, bare_message(e));
  }
  report.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return report;
}

json report_to_json(const RunReport& r) {
  json est = json::array();
  for (const auto& e : r.estimates)
    est.push_back({{"estimand", e.estimand},
                   {"value", e.value},
                   {"std_error", e.std_error},
                   {"reps", e.reps},
                   {"method", e.method}});
  json checks = json::array();
  for (const auto& c : r.checks) checks.push_back({{"name", c.name}, {"passed", c.passed}, {"detail", c.detail}});
  return {{"config", config_to_json(r.config)},
          {"resolved_model", r.resolved_model},
          {"model_hash", r.model_hash},
          {"version", r.version},
          {"estimates", est},
          {"result", r.result},
          {"checks", checks},
          {"wall_seconds", r.wall_seconds}};
}

std::string report_to_csv(const RunReport& r) {
  std::ostringstream os;
  os << std::setprecision(17);
  os << "estimand,value,std_error,reps,method,model_hash,seed\n";
  for (const auto& e : r.estimates)
    os << csv_field(e.estimand) << ',' << e.value << ',' << e.std_error << ',' << e.reps << ',' << csv_field(e.method)
       << ',' << r.model_hash << ',' << r.config.seed << '\n';
  return os.str();
}

std::string render_report(const RunReport& report) {
  return report.config.format == OutputFormat::csv ? report_to_csv(report) : report_to_json(report).dump(2) + "\n";
}

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const ValidationError*>(&e)) return 2;
  if (dynamic_cast<const ConditioningStarvation*>(&e)) return 3;
  if (dynamic_cast<const PopulationCapError*>(&e)) return 4;
  return 1;
}

}  // namespace bpre
