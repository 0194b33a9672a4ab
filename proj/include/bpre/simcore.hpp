#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <sstream>

#include "bpre/environment.hpp"
#include "bpre/errors.hpp"
#include "bpre/stats.hpp"

namespace bpre {

struct LineageTrajectory {
  EnvSequence env;
  // pops[g][i]: size of lineage i at generation g, for g = 0..n.
  std::vector<std::vector<std::uint64_t>> pops;
  unsigned alive = 0;        // N_n
  std::uint64_t total = 0;   // Z_n
};

inline constexpr std::uint64_t kDefaultPopulationCap = 10'000'000;

// One environment path, then k lineages evolved independently under it.
LineageTrajectory simulate_lineages(const EnvironmentModel& model, unsigned k, std::size_t n, Stream& rng,
                                    std::uint64_t population_cap = kDefaultPopulationCap);

struct EstimatorConfig {
  std::uint64_t reps = 10'000;
  std::uint64_t seed = 1;
  std::optional<Method> method;  // each estimator documents its default
  std::size_t chunk = kDefaultChunk;
};

// P_k(Z_n > 0) = E(1 - F_n(0)^k). Default method env-exact; tilted-IS tilts by alpha.
EstimateWithCI annealed_survival(const EnvironmentModel& model, unsigned k, std::size_t n,
                                 const EstimatorConfig& cfg);

// P_k(all k lineages survive) = E((1 - F_n(0))^k). tilted-IS tilts by the
// k-particle minimizer when E(m^k log m) > 0 and by k otherwise.
EstimateWithCI joint_survival(const EnvironmentModel& model, unsigned k, std::size_t n,
                              const EstimatorConfig& cfg);

struct InclusionExclusionReport {
  EstimateWithCI direct;       // E(1 - (1-p)^k)
  EstimateWithCI alternating;  // sum_i (-1)^(i+1) C(k,i) E(p^i)
  double max_pathwise_difference = 0.0;
};
InclusionExclusionReport inclusion_exclusion_check(const EnvironmentModel& model, unsigned k, std::size_t n,
                                                   const EstimatorConfig& cfg);

struct AlphaKPoint {
  unsigned k;
  std::size_t n;
  double value;
  double std_error;    // delta method on the common-random-number ratio
  double combined_se;  // numerator and denominator standard errors propagated as if separate
  double denominator_rel_se;
};
struct AlphaKCurve {
  std::vector<AlphaKPoint> points;   // every (k, n) cell
  std::vector<AlphaKPoint> at_largest_n;
  std::vector<double> trend_slope;   // per k, least-squares slope of the ratio against n
  std::vector<std::string> warnings;
  Method method = Method::env_exact;
};
// Ratio P_k(Z_n>0) / P_1(Z_n>0) from common environment draws.
AlphaKCurve alpha_k_curve(const EnvironmentModel& model, const std::vector<unsigned>& ks,
                          const std::vector<std::size_t>& ns, const EstimatorConfig& cfg);

// Conditioned estimators need at least this many effective conditioning
// events; the replicate count doubles up to kMaxEscalation times the request.
inline constexpr double kTargetConditioningEvents = 200.0;
inline constexpr double kMinConditioningEvents = 50.0;
inline constexpr std::uint64_t kMaxEscalation = 16;

// Runs cfg.reps replicates, then keeps doubling until ess(acc) reaches
// kTargetConditioningEvents or kMaxEscalation times the request. Throws
// ConditioningStarvation below kMinConditioningEvents.
template <class Acc, class Make, class Visit, class Ess>
Acc conditioned_reduce(const EstimatorConfig& cfg, Make&& make, Visit&& visit, Ess&& ess) {
  if (cfg.reps == 0) throw ValidationError("reps", "need at least one replicate");
  Acc total = replicate_reduce<Acc>(0, cfg.reps, make, visit, cfg.chunk);
  std::uint64_t done = cfg.reps;
  while (ess(total) < kTargetConditioningEvents && done < kMaxEscalation * cfg.reps) {
    total.merge(replicate_reduce<Acc>(done, done, make, visit, cfg.chunk));
    done *= 2;
  }
  const double events = ess(total);
  if (events < kMinConditioningEvents) {
    std::ostringstream os;
    os << "only " << events << " effective conditioning events after " << done << " replicates";
    throw ConditioningStarvation(os.str());
  }
  return total;
}

// Row-sample version: fn(rep, row) fills `dim` columns and column `weight_col`
// holds the conditioning weight.
template <class F>
SampleStats conditioned_stats(std::size_t dim, std::size_t weight_col, const EstimatorConfig& cfg, F&& fn) {
  return conditioned_reduce<SampleStats>(
      cfg, [dim] { return SampleStats(dim); },
      [&fn, dim](std::uint64_t r, SampleStats& acc) {
        thread_local std::vector<double> buf;
        buf.assign(dim, 0.0);
        fn(r, std::span<double>(buf));
        acc.add(buf);
      },
      [weight_col](const SampleStats& s) { return s.effective_sample_size(weight_col); });
}

// SS models condition with plain environment draws; IS and WS tilt by alpha.
Method default_conditioning_method(const EnvironmentModel& model);

struct LineageCountDistribution {
  unsigned k = 1;
  std::size_t n = 0;
  std::vector<double> pmf;  // index j = 0..k, pmf[0] = 0
  std::vector<double> std_error;
  std::uint64_t replicates = 0;
  double effective_events = 0.0;
  Method method = Method::env_exact;
};
// Law of N_n given Z_n > 0: N_n | env ~ Binomial(k, 1 - F_n(0)), conditioned on N_n >= 1.
LineageCountDistribution conditional_lineage_counts(const EnvironmentModel& model, unsigned k, std::size_t n,
                                                    const EstimatorConfig& cfg);

struct EnvSelectionCurve {
  unsigned k = 1;
  std::size_t n = 0;
  std::vector<double> epsilon;
  std::vector<double> value;  // P(p(f_n) >= eps | Z_n > 0)
  std::vector<double> std_error;
  std::uint64_t replicates = 0;
  double effective_events = 0.0;
  Method method = Method::env_exact;
};
EnvSelectionCurve conditional_env_survival(const EnvironmentModel& model, unsigned k, std::size_t n,
                                           const std::vector<double>& epsilon_grid, const EstimatorConfig& cfg);

// Unconditional pmf of N_n from full lineage simulation (index 0..k).
std::vector<double> simulated_lineage_count_pmf(const EnvironmentModel& model, unsigned k, std::size_t n,
                                                const EstimatorConfig& cfg);
// Unconditional pmf of N_n from the Binomial(k, 1 - F_n(0)) mixture (index 0..k).
std::vector<double> binomial_mixture_lineage_count_pmf(const EnvironmentModel& model, unsigned k,
                                                       std::size_t n, const EstimatorConfig& cfg);

}  // namespace bpre
