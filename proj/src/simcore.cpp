#include "bpre/simcore.hpp"

#include <cmath>
#include <sstream>

#include "bpre/errors.hpp"
#include "bpre/lfexact.hpp"
#include "bpre/regime.hpp"
#include "bpre/sampler.hpp"

namespace bpre {

namespace {

double log_binomial_coefficient(unsigned n, unsigned k) {
  return std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0);
}

// P(Binomial(k, p) = j) from log p.
double binomial_pmf(unsigned k, unsigned j, double log_p) {
  const double p = std::exp(log_p);
  const double log_q = p >= 1.0 ? -std::numeric_limits<double>::infinity() : std::log1p(-p);
  double lp = log_binomial_coefficient(k, j);
  if (j > 0) lp += j * log_p;
  if (k - j > 0) lp += (k - j) * log_q;
  return std::exp(lp);
}

void require_k(unsigned k) {
  if (k == 0) throw ValidationError("k", "need at least one initial particle");
}

void require_reps(std::uint64_t reps) {
  if (reps == 0) throw ValidationError("reps", "need at least one replicate");
}

// Draws one environment path for replicate `rep`; returns (log weight, log p).
std::pair<double, double> draw_and_survive(const EnvSampler& sampler, std::size_t n, std::uint64_t seed,
                                           std::uint64_t rep) {
  thread_local std::vector<std::uint32_t> idx;
  Stream rng(seed, rep, Purpose::environment);
  const double log_w = sampler.draw(n, rng, idx);
  const double log_p =
      log_survival_by(n, [&](std::size_t i) -> const OffspringLaw& { return sampler.law(idx[i]); });
  return {log_w, log_p};
}

// k p - (1 - (1-p)^k) >= 0 without cancellation for small p.
double survival_deficit(double p, unsigned k) {
  const double dk = k;
  if (dk * p < 1e-2) {
    // sum_{i>=2} (-1)^i C(k, i) p^i
    double term = 1.0, sum = 0.0;
    for (unsigned i = 1; i <= k; ++i) {
      term *= -(dk - i + 1) / i * p;
      if (i >= 2) sum += term;
      if (std::abs(term) < 1e-18 * std::abs(sum)) break;
    }
    return std::max(0.0, sum);
  }
  return std::max(0.0, dk * p - at_least_one_survives(p, k));
}

double tilt_for(const EnvironmentModel& model, Method method) {
  return method == Method::tilted_is ? solve_alpha(model).alpha : 0.0;
}

EstimateWithCI make_estimate(std::string estimand, const SampleStats& s, std::size_t col, Method method,
                             std::uint64_t seed) {
  return {std::move(estimand), s.mean(col), s.se_mean(col), s.count(), method, seed};
}

}  // namespace

LineageTrajectory simulate_lineages(const EnvironmentModel& model, unsigned k, std::size_t n, Stream& rng,
                                    std::uint64_t population_cap) {
  require_k(k);
  LineageTrajectory out;
  out.env = draw_env(model, n, rng);
  out.pops.assign(n + 1, std::vector<std::uint64_t>(k, 0));
  std::fill(out.pops[0].begin(), out.pops[0].end(), 1);
  for (std::size_t g = 0; g < n; ++g) {
    for (unsigned i = 0; i < k; ++i) {
      const std::uint64_t next = out.env[g].sample_sum(out.pops[g][i], rng);
      if (next > population_cap) {
        std::ostringstream os;
        os << "lineage " << i << " reached " << next << " individuals at generation " << g + 1 << " (cap "
           << population_cap << ")";
        throw PopulationCapError(os.str());
      }
      out.pops[g + 1][i] = next;
    }
  }
  for (auto z : out.pops[n]) {
    out.total += z;
    out.alive += z > 0 ? 1 : 0;
  }
  return out;
}

Method default_conditioning_method(const EnvironmentModel& model) {
  return classify(model).regime == Regime::strongly_subcritical ? Method::env_exact : Method::tilted_is;
}

EstimateWithCI annealed_survival(const EnvironmentModel& model, unsigned k, std::size_t n,
                                 const EstimatorConfig& cfg) {
  require_k(k);
  require_reps(cfg.reps);
  const Method method = cfg.method.value_or(Method::env_exact);
  const std::string estimand = "P_" + std::to_string(k) + "(Z_" + std::to_string(n) + ">0)";
  if (n == 0) return {estimand, 1.0, 0.0, cfg.reps, method, cfg.seed};

  switch (method) {
    case Method::exact_enum: {
      double total = 0.0;
      for_each_env_sequence(model, n, [&](std::span<const std::uint32_t> idx, double prob) {
        const double lp = log_survival_by(n, [&](std::size_t i) -> const OffspringLaw& { return model.law(idx[i]); });
        total += prob * at_least_one_survives(std::exp(lp), k);
      });
      return {estimand, total, 0.0, env_sequence_count(model, n), method, cfg.seed};
    }
    case Method::direct_sim: {
      auto s = replicate_stats(cfg.reps, 1, [&](std::uint64_t rep, std::span<double> row) {
        Stream rng(cfg.seed, rep, Purpose::population);
        row[0] = simulate_lineages(model, k, n, rng).total > 0 ? 1.0 : 0.0;
      }, cfg.chunk);
      return make_estimate(estimand, s, 0, method, cfg.seed);
    }
    case Method::env_exact:
    case Method::tilted_is: {
      const EnvSampler sampler(model, tilt_for(model, method));
      auto s = replicate_stats(cfg.reps, 1, [&](std::uint64_t rep, std::span<double> row) {
        const auto [log_w, log_p] = draw_and_survive(sampler, n, cfg.seed, rep);
        row[0] = std::exp(log_w) * at_least_one_survives(std::exp(log_p), k);
      }, cfg.chunk);
      return make_estimate(estimand, s, 0, method, cfg.seed);
    }
  }
  throw ValidationError("method", "unsupported method");
}

EstimateWithCI joint_survival(const EnvironmentModel& model, unsigned k, std::size_t n, const EstimatorConfig& cfg) {
  require_k(k);
  require_reps(cfg.reps);
  const Method method = cfg.method.value_or(Method::env_exact);
  const std::string estimand = "P_" + std::to_string(k) + "(all Z^(i)_" + std::to_string(n) + ">0)";
  if (n == 0) return {estimand, 1.0, 0.0, cfg.reps, method, cfg.seed};
  const double dk = static_cast<double>(k);

  switch (method) {
    case Method::exact_enum: {
      double total = 0.0;
      for_each_env_sequence(model, n, [&](std::span<const std::uint32_t> idx, double prob) {
        const double lp = log_survival_by(n, [&](std::size_t i) -> const OffspringLaw& { return model.law(idx[i]); });
        total += prob * std::exp(dk * lp);
      });
      return {estimand, total, 0.0, env_sequence_count(model, n), method, cfg.seed};
    }
    case Method::direct_sim: {
      auto s = replicate_stats(cfg.reps, 1, [&](std::uint64_t rep, std::span<double> row) {
        Stream rng(cfg.seed, rep, Purpose::population);
        row[0] = simulate_lineages(model, k, n, rng).alive == k ? 1.0 : 0.0;
      }, cfg.chunk);
      return make_estimate(estimand, s, 0, method, cfg.seed);
    }
    case Method::env_exact:
    case Method::tilted_is: {
      double theta = 0.0;
      if (method == Method::tilted_is) {
        const auto gt = solve_gamma_tilde(model, k);
        theta = gt.joint_case == JointSurvivalCase::interior ? gt.alpha_tilde : dk;
      }
      const EnvSampler sampler(model, theta);
      auto s = replicate_stats(cfg.reps, 1, [&](std::uint64_t rep, std::span<double> row) {
        const auto [log_w, log_p] = draw_and_survive(sampler, n, cfg.seed, rep);
        row[0] = std::exp(log_w + dk * log_p);
      }, cfg.chunk);
      return make_estimate(estimand, s, 0, method, cfg.seed);
    }
  }
  throw ValidationError("method", "unsupported method");
}

InclusionExclusionReport inclusion_exclusion_check(const EnvironmentModel& model, unsigned k, std::size_t n,
                                                   const EstimatorConfig& cfg) {
  require_k(k);
  require_reps(cfg.reps);
  if (k > 6) throw ValidationError("k", "inclusion-exclusion check supports k <= 6");
  const Method method = cfg.method.value_or(Method::env_exact);
  if (method != Method::env_exact && method != Method::tilted_is)
    throw ValidationError("method", "inclusion-exclusion check needs env-exact or tilted-IS");
  const EnvSampler sampler(model, tilt_for(model, method));
  auto s = replicate_stats(cfg.reps, 3, [&](std::uint64_t rep, std::span<double> row) {
    const auto [log_w, log_p] = draw_and_survive(sampler, n, cfg.seed, rep);
    const double p = std::exp(log_p);
    const double lhs = at_least_one_survives(p, k);
    double rhs = 0.0, choose = 1.0;
    for (unsigned i = 1; i <= k; ++i) {
      choose = choose * (k - i + 1) / i;
      rhs += ((i % 2) ? 1.0 : -1.0) * choose * std::exp(i * log_p);
    }
    const double w = std::exp(log_w);
    row[0] = w * lhs;
    row[1] = w * rhs;
    row[2] = std::abs(lhs - rhs);
  }, cfg.chunk);
  InclusionExclusionReport out;
  out.direct = make_estimate("P_k(Z_n>0)", s, 0, method, cfg.seed);
  out.alternating = make_estimate("sum_i (-1)^(i+1) C(k,i) E(p^i)", s, 1, method, cfg.seed);
  out.max_pathwise_difference = s.max(2);
  return out;
}

AlphaKCurve alpha_k_curve(const EnvironmentModel& model, const std::vector<unsigned>& ks,
                          const std::vector<std::size_t>& ns, const EstimatorConfig& cfg) {
  require_reps(cfg.reps);
  if (ks.empty() || ns.empty()) throw ValidationError("k", "need at least one k and one n");
  for (std::size_t i = 1; i < ns.size(); ++i)
    if (ns[i] <= ns[i - 1]) throw ValidationError("n", "horizons must be increasing");
  for (auto k : ks) require_k(k);
  AlphaKCurve out;
  out.method = cfg.method.value_or(Method::env_exact);
  if (out.method != Method::env_exact && out.method != Method::tilted_is)
    throw ValidationError("method", "alpha_k curve needs env-exact or tilted-IS");
  const EnvSampler sampler(model, tilt_for(model, out.method));

  std::vector<std::vector<double>> by_k(ks.size());
  for (auto n : ns) {
    // column 0: w p, column 1 + j: w (k_j p - (1 - (1-p)^k_j)), so that
    // alpha_k = k - mean(col 1 + j) / mean(col 0) keeps full relative precision
    auto s = replicate_stats(cfg.reps, ks.size() + 1, [&](std::uint64_t rep, std::span<double> row) {
      const auto [log_w, log_p] = draw_and_survive(sampler, n, cfg.seed, rep);
      const double w = std::exp(log_w), p = std::exp(log_p);
      row[0] = w * p;
      for (std::size_t j = 0; j < ks.size(); ++j) row[j + 1] = w * survival_deficit(p, ks[j]);
    }, cfg.chunk);
    const double rel = s.mean(0) > 0.0 ? s.se_mean(0) / s.mean(0) : std::numeric_limits<double>::infinity();
    if (rel > 0.1) {
      std::ostringstream os;
      os << "n=" << n << ": denominator relative SE " << rel << " exceeds 10%";
      out.warnings.push_back(os.str());
    }
    for (std::size_t j = 0; j < ks.size(); ++j) {
      const double k = ks[j];
      AlphaKPoint pt{ks[j], n, k - s.ratio(j + 1, 0), s.ratio_se(j + 1, 0), 0.0, rel};
      // numerator k D - deficit, its SE propagated with the denominator's
      const double num = k * s.mean(0) - s.mean(j + 1);
      const double num_var = k * k * s.var(0) - 2.0 * k * s.cov(0, j + 1) + s.var(j + 1);
      const double num_rel = num > 0.0 ? std::sqrt(std::max(0.0, num_var) / double(s.count())) / num : 0.0;
      pt.combined_se = std::abs(pt.value) * std::sqrt(num_rel * num_rel + rel * rel);
      out.points.push_back(pt);
      by_k[j].push_back(pt.value);
      if (n == ns.back()) out.at_largest_n.push_back(pt);
    }
  }
  std::vector<double> xs(ns.begin(), ns.end());
  for (std::size_t j = 0; j < ks.size(); ++j)
    out.trend_slope.push_back(ns.size() >= 2 ? fit_line(xs, by_k[j]).slope : 0.0);
  return out;
}

LineageCountDistribution conditional_lineage_counts(const EnvironmentModel& model, unsigned k, std::size_t n,
                                                    const EstimatorConfig& cfg) {
  require_k(k);
  LineageCountDistribution out;
  out.k = k;
  out.n = n;
  out.method = cfg.method ? *cfg.method : default_conditioning_method(model);
  if (out.method != Method::env_exact && out.method != Method::tilted_is)
    throw ValidationError("method", "lineage counts need env-exact or tilted-IS");
  const EnvSampler sampler(model, tilt_for(model, out.method));
  // column 0: W = w P(N >= 1 | env); column j: w P(N = j | env)
  auto s = conditioned_stats(k + 1, 0, cfg, [&](std::uint64_t rep, std::span<double> row) {
    const auto [log_w, log_p] = draw_and_survive(sampler, n, cfg.seed, rep);
    const double w = std::exp(log_w);
    row[0] = w * at_least_one_survives(std::exp(log_p), k);
    for (unsigned j = 1; j <= k; ++j) row[j] = w * binomial_pmf(k, j, log_p);
  });
  out.pmf.assign(k + 1, 0.0);
  out.std_error.assign(k + 1, 0.0);
  for (unsigned j = 1; j <= k; ++j) {
    out.pmf[j] = s.ratio(j, 0);
    out.std_error[j] = s.ratio_se(j, 0);
  }
  out.replicates = s.count();
  out.effective_events = s.effective_sample_size(0);
  return out;
}

EnvSelectionCurve conditional_env_survival(const EnvironmentModel& model, unsigned k, std::size_t n,
                                           const std::vector<double>& epsilon_grid, const EstimatorConfig& cfg) {
  require_k(k);
  for (double e : epsilon_grid)
    if (!(e >= 0.0 && e <= 1.0)) throw ValidationError("epsilon", "thresholds must lie in [0, 1]");
  EnvSelectionCurve out;
  out.k = k;
  out.n = n;
  out.epsilon = epsilon_grid;
  out.method = cfg.method ? *cfg.method : default_conditioning_method(model);
  if (out.method != Method::env_exact && out.method != Method::tilted_is)
    throw ValidationError("method", "environment selection needs env-exact or tilted-IS");
  const EnvSampler sampler(model, tilt_for(model, out.method));
  const std::size_t m = epsilon_grid.size();
  auto s = conditioned_stats(m + 1, 0, cfg, [&](std::uint64_t rep, std::span<double> row) {
    const auto [log_w, log_p] = draw_and_survive(sampler, n, cfg.seed, rep);
    const double p = std::exp(log_p);
    const double weight = std::exp(log_w) * at_least_one_survives(p, k);
    row[0] = weight;
    for (std::size_t j = 0; j < m; ++j) row[j + 1] = (epsilon_grid[j] == 0.0 || p >= epsilon_grid[j]) ? weight : 0.0;
  });
  for (std::size_t j = 0; j < m; ++j) {
    out.value.push_back(s.ratio(j + 1, 0));
    out.std_error.push_back(s.ratio_se(j + 1, 0));
  }
  out.replicates = s.count();
  out.effective_events = s.effective_sample_size(0);
  return out;
}

std::vector<double> simulated_lineage_count_pmf(const EnvironmentModel& model, unsigned k, std::size_t n,
                                                const EstimatorConfig& cfg) {
  require_k(k);
  require_reps(cfg.reps);
  auto s = replicate_stats(cfg.reps, k + 1, [&](std::uint64_t rep, std::span<double> row) {
    Stream rng(cfg.seed, rep, Purpose::population);
    row[simulate_lineages(model, k, n, rng).alive] = 1.0;
  }, cfg.chunk);
  std::vector<double> pmf(k + 1);
  for (unsigned j = 0; j <= k; ++j) pmf[j] = s.mean(j);
  return pmf;
}

std::vector<double> binomial_mixture_lineage_count_pmf(const EnvironmentModel& model, unsigned k, std::size_t n,
                                                       const EstimatorConfig& cfg) {
  require_k(k);
  require_reps(cfg.reps);
  const EnvSampler sampler(model, 0.0);
  auto s = replicate_stats(cfg.reps, k + 1, [&](std::uint64_t rep, std::span<double> row) {
    const auto [log_w, log_p] = draw_and_survive(sampler, n, cfg.seed, rep);
    (void)log_w;
    for (unsigned j = 0; j <= k; ++j) row[j] = binomial_pmf(k, j, log_p);
  }, cfg.chunk);
  std::vector<double> pmf(k + 1);
  for (unsigned j = 0; j <= k; ++j) pmf[j] = s.mean(j);
  return pmf;
}

}  // namespace bpre
