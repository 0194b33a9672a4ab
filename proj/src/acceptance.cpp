#include "bpre/acceptance.hpp"

#include <chrono>
#include <cmath>
#include <iomanip>
#include <sstream>

#include "bpre/environment.hpp"
#include "bpre/errors.hpp"
#include "bpre/lfexact.hpp"
#include "bpre/limits.hpp"
#include "bpre/regime.hpp"
#include "bpre/rwalk.hpp"
#include "bpre/sampler.hpp"
#include "bpre/simcore.hpp"

namespace bpre {

namespace {

const std::vector<std::string> kRefModels = {"ss-ref", "is-ref", "ws-ref"};

std::string fmt(double v, int prec = 6) {
  std::ostringstream os;
  os << std::setprecision(prec) << v;
  return os.str();
}

struct Check {
  bool ok = true;
  std::ostringstream detail;
  void require(bool cond, const std::string& what) {
    if (!cond) ok = false;
    if (detail.tellp() > 0) detail << "; ";
    detail << (cond ? "" : "FAILED ") << what;
  }
  void note(const std::string& what) {
    if (detail.tellp() > 0) detail << "; ";
    detail << what;
  }
};

EstimatorConfig config(std::uint64_t seed, std::uint64_t reps, std::optional<Method> method = std::nullopt) {
  EstimatorConfig cfg;
  cfg.seed = seed;
  cfg.reps = reps;
  cfg.method = method;
  return cfg;
}

double combined(double a, double b) { return std::sqrt(a * a + b * b); }

// ---- criteria

void exact_lf_closed_form(Check& c, const AcceptanceOptions& opts) {
  const auto law = OffspringLaw::linear_fractional(0.25, 0.5);
  const ClosedFormFn closed = opts.closed_form ? opts.closed_form : ClosedFormFn(lf_closed_form_log_survival);
  EnvSequence env;
  double worst = 0.0;
  std::size_t worst_n = 0;
  for (std::size_t n = 1; n <= 1000; ++n) {
    env.push_back(law);
    const double exact = 1.0 / (1.0 + double(n));
    const double iter = std::exp(log_survival(env));
    const double cf = std::exp(closed(env));
    const double d = std::max({std::abs(iter - exact), std::abs(cf - exact), std::abs(cf - iter)});
    if (d > worst) {
      worst = d;
      worst_n = n;
    }
  }
  c.require(worst <= 1e-10, "max |closed form - iteration - 1/(1+n)| = " + fmt(worst) + " at n=" +
                                std::to_string(worst_n) + " (tol 1e-10)");
}

void lemma_upper_bound(Check& c, std::uint64_t seed) {
  constexpr std::size_t n = 30;
  for (const auto& name : kRefModels) {
    const auto model = reference_model(name);
    const EnvSampler sampler(model, 0.0);
    auto s = replicate_stats(100'000, 1, [&](std::uint64_t rep, std::span<double> row) {
      thread_local std::vector<std::uint32_t> idx;
      Stream rng(seed, rep, Purpose::environment);
      sampler.draw(n, rng, idx);
      const double p = std::exp(log_survival_by(n, [&](std::size_t i) -> const OffspringLaw& { return model.law(idx[i]); }));
      double sum = 0.0, low = std::numeric_limits<double>::infinity();
      for (auto i : idx) low = std::min(low, sum += model.law(i).log_mean());
      row[0] = p - std::exp(low);
    });
    c.require(s.max(0) <= 1e-12, name + ": max(p - e^L) = " + fmt(s.max(0)) + " over 1e5 paths");
  }
}

void minorant_coupling(Check& c, std::uint64_t seed) {
  constexpr std::size_t n = 20;
  for (const auto& name : kRefModels) {
    const auto model = reference_model(name);
    std::vector<OffspringLaw> minor;
    for (std::size_t i = 0; i < model.size(); ++i) minor.push_back(lf_minorant(model.law(i)));
    const EnvSampler sampler(model, 0.0);
    auto s = replicate_stats(10'000, 1, [&](std::uint64_t rep, std::span<double> row) {
      thread_local std::vector<std::uint32_t> idx;
      Stream rng(seed, rep, Purpose::environment);
      sampler.draw(n, rng, idx);
      const double lp = log_survival_by(n, [&](std::size_t i) -> const OffspringLaw& { return model.law(idx[i]); });
      const double lq = log_survival_by(n, [&](std::size_t i) -> const OffspringLaw& { return minor[idx[i]]; });
      row[0] = lq - lp;
    });
    c.require(s.max(0) <= 1e-12, name + ": max(log p~ - log p) = " + fmt(s.max(0)) + " over 1e4 paths");
  }
}

void regime_solver(Check& c) {
  const auto ws = classify(reference_model("ws-ref"));
  const double a = std::log(2.0) / 3.0, g = (std::pow(2.0, -2.0 / 3.0) + std::pow(2.0, 1.0 / 3.0)) / 2.0;
  c.require(ws.regime == Regime::weakly_subcritical, "ws-ref regime " + to_string(ws.regime));
  c.require(std::abs(ws.alpha - a) <= 1e-8, "ws-ref |alpha - ln2/3| = " + fmt(std::abs(ws.alpha - a)));
  c.require(std::abs(ws.gamma - g) <= 1e-8, "ws-ref |gamma - gamma*| = " + fmt(std::abs(ws.gamma - g)));
  const auto is = classify(reference_model("is-ref"));
  c.require(is.regime == Regime::intermediate_subcritical, "is-ref regime " + to_string(is.regime));
  c.require(std::abs(is.e_m_log_m) <= 1e-12, "is-ref |E(m log m)| = " + fmt(std::abs(is.e_m_log_m)));
  c.require(std::abs(is.gamma - 0.6) <= 1e-15, "is-ref gamma = " + fmt(is.gamma, 17));
  const auto ss = classify(reference_model("ss-ref"));
  c.require(ss.regime == Regime::strongly_subcritical, "ss-ref regime " + to_string(ss.regime));
  c.require(std::abs(ss.gamma - 0.375) <= 1e-15, "ss-ref gamma = " + fmt(ss.gamma, 17));
}

void inclusion_exclusion(Check& c, std::uint64_t seed) {
  double worst = 0.0;
  for (const auto& name : kRefModels)
    for (unsigned k : {2u, 3u, 4u}) {
      const auto r = inclusion_exclusion_check(reference_model(name), k, 20, config(seed, 10'000));
      worst = std::max(worst, r.max_pathwise_difference);
    }
  c.require(worst <= 1e-12, "max path-wise |direct - alternating| = " + fmt(worst) + " (3 models, k=2..4, 1e4 draws)");
}

// alpha_k(n) = E(1 - (1-p)^k) / E(p) by enumerating every environment sequence.
double exact_alpha_k(const EnvironmentModel& model, unsigned k, std::size_t n) {
  double num = 0.0, den = 0.0;
  for_each_env_sequence(model, n, [&](std::span<const std::uint32_t> idx, double prob) {
    const double p = std::exp(log_survival_by(n, [&](std::size_t i) -> const OffspringLaw& { return model.law(idx[i]); }));
    num += prob * at_least_one_survives(p, k);
    den += prob * p;
  });
  return num / den;
}

// P(N_n = k | Z_n > 0) by enumeration.
double exact_all_lineages(const EnvironmentModel& model, unsigned k, std::size_t n) {
  double num = 0.0, den = 0.0;
  for_each_env_sequence(model, n, [&](std::span<const std::uint32_t> idx, double prob) {
    const double p = std::exp(log_survival_by(n, [&](std::size_t i) -> const OffspringLaw& { return model.law(idx[i]); }));
    num += prob * std::pow(p, k);
    den += prob * at_least_one_survives(p, k);
  });
  return num / den;
}

void alpha_k_linear(Check& c, std::uint64_t seed) {
  for (const auto& name : {"ss-ref", "is-ref"}) {
    const auto model = reference_model(name);
    const auto curve = alpha_k_curve(model, {2, 3}, {20}, config(seed, 100'000, default_conditioning_method(model)));
    for (const auto& pt : curve.at_largest_n) {
      const double z = std::abs(pt.value - pt.k) / pt.combined_se;
      c.require(z <= 3.0, std::string(name) + " k=" + std::to_string(pt.k) + ": " + fmt(pt.value, 10) + " +- " +
                              fmt(pt.combined_se, 3) + " (" + fmt(z, 3) + " combined SE from k; CRN SE " +
                              fmt(pt.std_error, 3) + ", exact alpha_k(20) = " + fmt(exact_alpha_k(model, pt.k, 20), 10) +
                              ")");
    }
  }
}

void ws_sublinear(Check& c, std::uint64_t seed) {
  const std::vector<unsigned> ks = {2, 4, 8, 16, 32};
  const auto curve = alpha_k_curve(reference_model("ws-ref"), ks, {20}, config(seed, 100'000, Method::tilted_is));
  std::vector<double> lx, ly;
  std::ostringstream vals;
  for (const auto& pt : curve.at_largest_n) {
    if (pt.k >= 4) c.require(pt.value < pt.k, "alpha_" + std::to_string(pt.k) + " = " + fmt(pt.value, 4) + " < k");
    lx.push_back(std::log(double(pt.k)));
    ly.push_back(std::log(pt.value));
  }
  const auto fit = fit_line(lx, ly);
  c.require(fit.slope > 0.0 && fit.slope < 0.7, "log-log slope " + fmt(fit.slope, 4) + " in (0, 0.7)");
}

void lineage_counts(Check& c, std::uint64_t seed) {
  const auto ss = reference_model("ss-ref");
  double prev = 2.0;
  bool decreasing = true;
  std::ostringstream trail;
  double last = 1.0;
  for (std::size_t n : {5u, 10u, 15u, 20u}) {
    const auto d = conditional_lineage_counts(ss, 3, n, config(seed, 100'000));
    const double more = 1.0 - d.pmf[1];
    trail << (n == 5 ? "" : ", ") << "n=" << n << ":" << fmt(more, 4);
    decreasing = decreasing && more < prev;
    prev = last = more;
  }
  c.require(decreasing, "ss-ref P(N>1|Z>0) decreasing [" + trail.str() + "]");
  c.require(last < 0.05, "ss-ref P(N_20>1|Z_20>0) = " + fmt(last, 4) + " < 0.05");
  const auto ws = reference_model("ws-ref");
  const auto d15 = conditional_lineage_counts(ws, 3, 15, config(seed, 100'000));
  const auto d20 = conditional_lineage_counts(ws, 3, 20, config(seed + 1, 100'000));
  const double z = std::abs(d20.pmf[3] - d15.pmf[3]) / combined(d20.std_error[3], d15.std_error[3]);
  c.require(z <= 3.0 && d20.pmf[3] > 0.0, "ws-ref P(N=3|Z>0): n=15 " + fmt(d15.pmf[3], 4) + ", n=20 " +
                                              fmt(d20.pmf[3], 4) + " (" + fmt(z, 3) + " combined SE apart; exact " +
                                              fmt(exact_all_lineages(ws, 3, 15), 4) + " and " +
                                              fmt(exact_all_lineages(ws, 3, 20), 4) + ")");
}

void env_selection(Check& c, std::uint64_t seed) {
  const auto ws = reference_model("ws-ref");
  const auto one = conditional_env_survival(ws, 1, 20, {0.01}, config(seed, 100'000));
  const auto many = conditional_env_survival(ws, 64, 20, {0.01}, config(seed, 100'000));
  c.require(one.value[0] >= 0.5, "k=1: P(p>=0.01|Z_20>0) = " + fmt(one.value[0], 4) + " +- " + fmt(one.std_error[0], 2) +
                                     " >= 0.5");
  const double z = (one.value[0] - many.value[0]) / combined(one.std_error[0], many.std_error[0]);
  c.require(z >= 3.0, "k=64: " + fmt(many.value[0], 4) + " +- " + fmt(many.std_error[0], 2) + ", below k=1 by " +
                          fmt(z, 3) + " combined SE");
}

// Fit the envelope constant on the first half of the horizons and verify it on the second.
EnvelopeReport minmaj_envelope(const StepLaw& steps) {
  const double theta = step_alpha(steps).alpha + 0.1;
  std::vector<std::size_t> ns;
  for (std::size_t n = 8; n <= 24; ++n) ns.push_back(n);
  const std::vector<double> xs = {0, 1, 2, 3, 4};
  return envelope_fit(steps, theta, ns, xs, [](std::size_t n, double) { return n <= 16; });
}

void walk_oracle(Check& c, std::uint64_t seed) {
  const auto steps = step_law(reference_model("ws-ref"));
  double worst = 0.0;
  for (std::size_t n : {8u, 16u})
    for (double x : {0.0, 1.0, 2.0}) {
      const double exact = ln_tail_exact(steps, n, x);
      for (Method m : {Method::direct_sim, Method::tilted_is}) {
        const auto est = ln_tail(steps, n, x, config(seed, 100'000, m));
        const double z = std::abs(est.value - exact) / est.std_error;
        worst = std::max(worst, z);
        c.require(z <= 4.0, "n=" + std::to_string(n) + " x=" + fmt(x) + " " + to_string(m) + ": " + fmt(z, 3) + " SE");
      }
    }
  const auto env = minmaj_envelope(steps);
  c.require(env.verified, "envelope c_theta = " + fmt(env.c_theta, 4) + " (theta = alpha + 0.1) fitted on n<=16, " +
                              (env.verified ? "holds" : "violated") + " on n=17..24");
}

void reflected_and_occupation(Check& c, std::uint64_t seed) {
  const auto steps = step_law(reference_model("ws-ref"));
  const auto r = reflected_sum_check(steps, {5, 10, 15, 20}, {0, 1, 2}, config(seed, 100'000));
  if (r.beta_hat) {
    double worst = 1.0;
    const auto b = static_cast<std::size_t>(std::find(r.beta_grid.begin(), r.beta_grid.end(), *r.beta_hat) -
                                            r.beta_grid.begin());
    for (const auto& cell : r.cells) worst = std::min(worst, cell.probability[b]);
    c.require(true, "beta_hat = " + fmt(*r.beta_hat) + ", min conditional P(R<=beta_hat) = " + fmt(worst, 4));
  } else {
    c.require(false, "no beta on 1..2^16 reaches 1/4 in every cell");
  }
  const auto occ = occupation_curve(steps, 20, 0, {1, 2, 4, 8, 16}, 1.0, config(seed, 100'000));
  std::ostringstream vals;
  for (std::size_t j = 0; j < occ.l.size(); ++j) vals << (j ? "," : "") << occ.l[j] << ":" << fmt(occ.value[j], 3);
  if (occ.loglog) {
    c.require(occ.loglog->slope <= -0.4, "occupation log-log slope " + fmt(occ.loglog->slope, 4) + " +- " +
                                             fmt(occ.loglog->slope_se, 2) + " <= -0.4 [" + vals.str() + "]");
  } else {
    c.require(false, "occupation curve has fewer than two positive points [" + vals.str() + "]");
  }
}

void yaglom_equation(Check& c, std::uint64_t seed) {
  const auto ss = reference_model("ss-ref");
  const double gamma = classify(ss).gamma;
  const auto y1 = yaglom(ss, 1, 20, config(seed, 100'000));
  const auto res = functional_residual(y1, ss, gamma);
  c.require(res.max_residual <= 0.02, "ss-ref max residual " + fmt(res.max_residual, 3) + " <= 0.02");

  const auto bern = constant_model(OffspringLaw::finite_support({0.5, 0.5}));
  const auto grid = pgf_grid();
  const double r_id = functional_residual(grid, grid, bern, 0.5).max_residual;
  const auto yb = yaglom(bern, 1, 10, config(seed, 1'000));
  const double r_est = functional_residual(yb, bern, 0.5).max_residual;
  c.require(r_id <= 1e-12 && r_est <= 1e-12 && yb.pmf[1] == 1.0,
            "Bernoulli residual " + fmt(r_id, 3) + " (G=id), " + fmt(r_est, 3) + " (estimated G, pmf(1)=" +
                fmt(yb.pmf[1]) + ")");

  const auto y3 = yaglom(ss, 3, 20, config(seed + 1, 100'000));
  const double tv = total_variation(y1.pmf, y3.pmf);
  const double budget = tv_se_budget(y1.std_error, y3.std_error);
  c.require(tv <= 4.0 * budget, "TV(k=1, k=3) = " + fmt(tv, 4) + " <= 4 x " + fmt(budget, 4));
}

// Trajectories above 10^7 matter for medians only through their rank.
constexpr std::uint64_t kWidePopulationCap = std::uint64_t{1} << 53;

void qprocess(Check& c, std::uint64_t seed) {
  double worst = 0.0;
  for (const auto& name : {"ss-ref", "is-ref"}) {
    const auto model = reference_model(name);
    for (std::uint64_t l = 1; l <= 10; ++l) {
      const auto row = qprocess_kernel(model, l, kDefaultStateCap);
      double sum = 0.0;
      for (double v : row.prob) sum += v;
      worst = std::max(worst, std::abs(1.0 - sum));
    }
  }
  c.require(worst <= 1e-10, "kernel rows l=1..10 sum to 1 within " + fmt(worst, 3));

  const auto ss = reference_model("ss-ref");
  const auto ya = yaglom(ss, 1, 20, config(seed, 100'000));
  const auto chain = qprocess_run(ss, 1, 30, config(seed, 100'000));
  const double tv = total_variation(chain.pmf, ya.size_biased);
  const double budget = tv_se_budget(chain.std_error, ya.size_biased_se);
  c.require(tv <= 4.0 * budget, "SS chain Y_30 vs size-biased Yaglom TV " + fmt(tv, 4) + " <= 4 x " + fmt(budget, 4));

  const auto is = qprocess_run(reference_model("is-ref"), 1, 30, config(seed, 20'000), kWsLookahead, kDefaultStateCap,
                               kWidePopulationCap);
  bool increasing = true;
  for (std::size_t t = 11; t <= 30; ++t) increasing = increasing && is.median[t] > is.median[t - 1];
  c.require(increasing,
            "IS median Y_10 = " + fmt(is.median[10]) + ", Y_20 = " + fmt(is.median[20]) + ", Y_30 = " +
                fmt(is.median[30]) + (increasing ? " (strictly increasing for t=10..30)" : " (not strictly increasing)"));

  const auto tiny = EnvironmentModel({{OffspringLaw::finite_support({0.5, 0.25, 0.25}), 0.5},
                                      {OffspringLaw::finite_support({0.7, 0.2, 0.1}), 0.5}});
  double pf = 0.0;
  for (unsigned k : {1u, 2u}) pf = std::max(pf, product_formula_check(tiny, k).max_abs_difference);
  c.require(pf <= 1e-10, "product formula vs enumeration max diff " + fmt(pf, 3));
}

// ---- extra experiments for the full suite

void extra_ws_yaglom_k(Check& c, std::uint64_t seed) {
  const auto ws = reference_model("ws-ref");
  const auto y1 = yaglom(ws, 1, 20, config(seed, 50'000));
  const auto y3 = yaglom(ws, 3, 20, config(seed + 1, 50'000));
  const double tv = total_variation(y1.pmf, y3.pmf);
  c.note("ws-ref TV(Yaglom k=1, k=3) at n=20 = " + fmt(tv, 4) + ", SE budget " +
         fmt(tv_se_budget(y1.std_error, y3.std_error), 4) + ", tail mass " + fmt(y1.tail_mass, 3) + "/" +
         fmt(y3.tail_mass, 3));
}

void extra_env_posterior(Check& c, std::uint64_t seed) {
  const auto ws = reference_model("ws-ref");
  const auto post = env_posterior(ws, 1, 1, 15, config(seed, 100'000));
  c.require(post.marginal[0][1] > 0.5, "ws-ref posterior weight of m=e given Z_16>0: " + fmt(post.marginal[0][1], 5) +
                                           " > prior 0.5 (" + to_string(post.method) + ")");
  const auto post3 = env_posterior(ws, 3, 2, 15, config(seed, 100'000));
  c.note("k=3, p=2: P(m_0=e) = " + fmt(post3.marginal[0][1], 4) + ", P(m_1=e) = " + fmt(post3.marginal[1][1], 4));
}

void extra_kernel_vs_conditioning(Check& c, std::uint64_t seed) {
  const auto ss = reference_model("ss-ref");
  const auto row = qprocess_kernel(ss, 1, 64);
  const auto emp = conditioned_transition(ss, 1, 15, 64, config(seed, 100'000));
  const std::vector<double> zero(row.prob.size(), 0.0);
  const double tv = total_variation(emp.prob, row.prob);
  const double budget = tv_se_budget(emp.std_error, zero);
  c.require(tv <= 4.0 * budget, "ss-ref kernel row l=1 vs Z_1 | Z_16 > 0: TV " + fmt(tv, 4) + " <= 4 x " + fmt(budget, 4));
}

void extra_lower_bound(Check& c, std::uint64_t seed) {
  constexpr std::size_t n = 30;
  for (const auto& name : kRefModels) {
    const auto model = reference_model(name);
    double ratio_max = 0.0;
    for (std::size_t i = 0; i < model.size(); ++i)
      ratio_max = std::max(ratio_max, model.law(i).f2() / model.law(i).mean());
    const double cc = 1.0 / (1.0 + ratio_max);
    const EnvSampler sampler(model, 0.0);
    auto s = replicate_stats(10'000, 1, [&](std::uint64_t rep, std::span<double> row) {
      thread_local std::vector<std::uint32_t> idx;
      thread_local std::vector<double> logs;
      Stream rng(seed, rep, Purpose::environment);
      sampler.draw(n, rng, idx);
      logs.clear();
      for (auto i : idx) logs.push_back(model.law(i).log_mean());
      const double lp = log_survival_by(n, [&](std::size_t i) -> const OffspringLaw& { return model.law(idx[i]); });
      row[0] = std::log(lienrw_lower_bound(logs, cc)) - lp;
    });
    c.require(s.max(0) <= 1e-12, name + ": max(log bound - log p) = " + fmt(s.max(0), 4));
  }
}

void extra_is_vs_exact(Check& c, std::uint64_t seed) {
  double worst = 0.0;
  for (const auto& name : kRefModels)
    for (unsigned k : {1u, 2u, 3u}) {
      const auto model = reference_model(name);
      const auto a = annealed_survival(model, k, 20, config(seed, 100'000, Method::env_exact));
      const auto b = annealed_survival(model, k, 20, config(seed + 1, 100'000, Method::tilted_is));
      worst = std::max(worst, std::abs(a.value - b.value) / combined(a.std_error, b.std_error));
    }
  c.require(worst <= 4.0, "annealed survival env-exact vs tilted-IS, 3 models x k=1..3, n=20: max " + fmt(worst, 3) +
                              " combined SE");
}

void extra_tail_shape(Check& c) {
  const auto steps = step_law(reference_model("ws-ref"));
  const auto shape = tail_shape(steps, 48, 64, {0, 1, 2, 3, 4, 5, 6});
  c.require(shape.max_relative_change < 0.10,
            "scaled exact tail n=48 -> 64 max relative change " + fmt(shape.max_relative_change, 3));
  c.require(shape.affine.r_squared >= 0.98, "affine fit of u(x) R^2 = " + fmt(shape.affine.r_squared, 4) +
                                                " (slope " + fmt(shape.affine.slope, 3) + ")");
}

void extra_joint_rate(Check& c, std::uint64_t seed) {
  const auto ss = reference_model("ss-ref");
  std::vector<double> xs, ys;
  for (std::size_t n : {8u, 12u, 16u, 20u}) {
    const auto e = joint_survival(ss, 2, n, config(seed, 100'000, Method::tilted_is));
    xs.push_back(double(n));
    ys.push_back(std::log(e.value));
  }
  const auto fit = fit_line(xs, ys);
  const double target = std::log(5.0 / 32.0);
  const double rel = std::abs(fit.slope - target) / std::abs(target);
  c.require(rel <= 0.10, "ss-ref k=2 joint survival log-slope " + fmt(fit.slope, 4) + " vs log E(m^2) = " +
                             fmt(target, 4) + " (" + fmt(100 * rel, 3) + "%)");
}

void extra_ws_qprocess(Check& c, std::uint64_t seed) {
  const auto run = qprocess_run(reference_model("ws-ref"), 1, 20, config(seed, 20'000), kWsLookahead, kDefaultStateCap,
                                kWidePopulationCap);
  c.note("ws-ref approximate Q-process (lookahead " + std::to_string(run.lookahead) + ") median Y_5 = " +
         fmt(run.median[5]) + ", Y_10 = " + fmt(run.median[10]) + ", Y_20 = " + fmt(run.median[20]));
}

struct Spec {
  int id;
  const char* name;
  bool report_only;
  std::function<void(Check&, const AcceptanceOptions&)> run;
};

std::vector<Spec> criteria() {
  return {
      {1, "LF closed form vs iteration", false, [](Check& c, const AcceptanceOptions& o) { exact_lf_closed_form(c, o); }},
      {2, "upper bound p <= exp(L_n)", false, [](Check& c, const AcceptanceOptions& o) { lemma_upper_bound(c, o.seed + 2); }},
      {3, "linear fractional minorant coupling", false,
       [](Check& c, const AcceptanceOptions& o) { minorant_coupling(c, o.seed + 3); }},
      {4, "regime solver", false, [](Check& c, const AcceptanceOptions&) { regime_solver(c); }},
      {5, "inclusion-exclusion identity", false,
       [](Check& c, const AcceptanceOptions& o) { inclusion_exclusion(c, o.seed + 5); }},
      {6, "alpha_k = k in SS and IS", false, [](Check& c, const AcceptanceOptions& o) { alpha_k_linear(c, o.seed + 6); }},
      {7, "WS sublinear alpha_k", false, [](Check& c, const AcceptanceOptions& o) { ws_sublinear(c, o.seed + 7); }},
      {8, "surviving lineage counts", false, [](Check& c, const AcceptanceOptions& o) { lineage_counts(c, o.seed + 8); }},
      {9, "environment selection", false, [](Check& c, const AcceptanceOptions& o) { env_selection(c, o.seed + 9); }},
      {10, "random walk oracle and envelope", false,
       [](Check& c, const AcceptanceOptions& o) { walk_oracle(c, o.seed + 10); }},
      {11, "reflected sum and occupation decay", false,
       [](Check& c, const AcceptanceOptions& o) { reflected_and_occupation(c, o.seed + 11); }},
      {12, "Yaglom functional equation", false,
       [](Check& c, const AcceptanceOptions& o) { yaglom_equation(c, o.seed + 12); }},
      {13, "Q-process kernel and chains", false, [](Check& c, const AcceptanceOptions& o) { qprocess(c, o.seed + 13); }},
  };
}

std::vector<Spec> extras() {
  return {
      {14, "tilted-IS vs env-exact survival", false,
       [](Check& c, const AcceptanceOptions& o) { extra_is_vs_exact(c, o.seed + 14); }},
      {15, "survival lower bound from the reversed walk", false,
       [](Check& c, const AcceptanceOptions& o) { extra_lower_bound(c, o.seed + 15); }},
      {16, "kernel row vs finite-horizon conditioning", false,
       [](Check& c, const AcceptanceOptions& o) { extra_kernel_vs_conditioning(c, o.seed + 16); }},
      {17, "SS two-particle joint survival rate", false,
       [](Check& c, const AcceptanceOptions& o) { extra_joint_rate(c, o.seed + 17); }},
      {18, "lattice tail shape", false, [](Check& c, const AcceptanceOptions&) { extra_tail_shape(c); }},
      {19, "environment posterior direction", false,
       [](Check& c, const AcceptanceOptions& o) { extra_env_posterior(c, o.seed + 19); }},
      {20, "WS Yaglom k-dependence (experiment)", true,
       [](Check& c, const AcceptanceOptions& o) { extra_ws_yaglom_k(c, o.seed + 20); }},
      {21, "WS Q-process growth (experiment)", true,
       [](Check& c, const AcceptanceOptions& o) { extra_ws_qprocess(c, o.seed + 21); }},
  };
}

CriterionResult execute(const Spec& s, const AcceptanceOptions& opts) {
  CriterionResult r;
  r.id = s.id;
  r.name = s.name;
  r.report_only = s.report_only;
  const auto t0 = std::chrono::steady_clock::now();
  Check c;
  try {
    s.run(c, opts);
    r.passed = c.ok;
    r.detail = c.detail.str();
  } catch (const std::exception& e) {
    r.passed = false;
    r.detail = c.detail.str() + (c.detail.tellp() > 0 ? "; " : "") + "error: " + e.what();
  }
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return r;
}

}  // namespace

CriterionResult run_criterion(int id, const AcceptanceOptions& opts) {
  for (const auto& s : criteria())
    if (s.id == id) return execute(s, opts);
  for (const auto& s : extras())
    if (s.id == id) return execute(s, opts);
  throw ValidationError("criterion", "unknown criterion " + std::to_string(id));
}

std::vector<CriterionResult> run_acceptance(const std::string& suite, const AcceptanceOptions& opts,
                                            const std::function<void(const CriterionResult&)>& on_result) {
  if (suite != "fast" && suite != "full") throw ValidationError("suite", "unknown suite '" + suite + "'");
  auto specs = criteria();
  if (suite == "full")
    for (auto& s : extras()) specs.push_back(s);
  std::vector<CriterionResult> out;
  for (const auto& s : specs) {
    out.push_back(execute(s, opts));
    if (on_result) on_result(out.back());
  }
  return out;
}

std::string format_result(const CriterionResult& r) {
  std::ostringstream os;
  os << (r.report_only ? "INFO" : (r.passed ? "PASS" : "FAIL")) << " [" << std::setw(2) << r.id << "] " << r.name
     << " (" << std::fixed << std::setprecision(2) << r.seconds << " s): " << r.detail;
  return os.str();
}

}  // namespace bpre
