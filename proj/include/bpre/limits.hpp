#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "bpre/environment.hpp"
#include "bpre/regime.hpp"
#include "bpre/simcore.hpp"
#include "bpre/stats.hpp"

namespace bpre {

inline constexpr std::size_t kDefaultStateCap = std::size_t{1} << 14;

// s = 0, 0.05, ..., 1
std::vector<double> pgf_grid();

struct YaglomEstimate {
  unsigned k = 1;
  std::size_t n = 0;
  std::size_t cap = kDefaultStateCap;
  std::vector<double> pmf;  // P(Z_n = j | Z_n > 0), j = 0..cap (pmf[0] = 0)
  std::vector<double> std_error;
  double tail_mass = 0.0;  // P(Z_n > cap | Z_n > 0)
  // size-biased law j pmf(j) / sum_i i pmf(i), with its own standard errors
  std::vector<double> size_biased;
  std::vector<double> size_biased_se;
  std::vector<double> s_grid;
  std::vector<double> pgf;  // E(s^{Z_n} | Z_n > 0) on s_grid
  std::vector<double> pgf_se;
  std::uint64_t replicates = 0;
  double effective_events = 0.0;
  Method method = Method::env_exact;
};

// Law of Z_n given Z_n > 0 started from k individuals. Each replicate draws an
// environment (tilted by alpha unless SS), weights it by P_k(Z_n > 0 | env)
// and samples Z_n from the exact conditional law given survival.
YaglomEstimate yaglom(const EnvironmentModel& model, unsigned k, std::size_t n, const EstimatorConfig& cfg,
                      std::size_t cap = kDefaultStateCap);

// Monotone piecewise cubic (Fritsch-Carlson) interpolant through (x_i, y_i), x increasing.
class MonotoneCubic {
 public:
  MonotoneCubic(std::vector<double> x, std::vector<double> y);
  double operator()(double t) const;

 private:
  std::vector<double> x_, y_, d_;
};

struct FunctionalResidual {
  std::vector<double> s_grid;
  std::vector<double> residual;  // |E(G(f(s))) - gamma G(s) - (1 - gamma)|
  double max_residual = 0.0;
};
FunctionalResidual functional_residual(const std::vector<double>& s_grid, const std::vector<double>& g,
                                       const EnvironmentModel& model, double gamma);
FunctionalResidual functional_residual(const YaglomEstimate& estimate, const EnvironmentModel& model, double gamma);

struct QKernelRow {
  std::uint64_t l = 1;
  std::size_t cap = 0;
  std::vector<double> prob;  // P(Y' = m | Y = l), m = 0..cap
  double tail_mass = 0.0;    // 1 - sum(prob), the mass above cap
};
// Size-biased one-step kernel gamma^{-1} (m / l) P_l(Z_1 = m). SS and IS only.
QKernelRow qprocess_kernel(const EnvironmentModel& model, std::uint64_t l, std::size_t cap);

// P(Y_1 = a, Y_2 = b) from the kernel against gamma^{-2} (b/k) P_k(Z_1 = a, Z_2 = b)
// from brute-force enumeration of every individual's offspring count.
struct ProductFormulaCheck {
  unsigned k = 1;
  std::size_t pairs = 0;
  double max_abs_difference = 0.0;
};
ProductFormulaCheck product_formula_check(const EnvironmentModel& model, unsigned k);

struct TransitionFrequencies {
  std::uint64_t l = 1;
  std::size_t horizon = 0;  // conditioning on Z_{1 + horizon} > 0
  std::vector<double> prob;  // P(Z_1 = m | Z_{1+horizon} > 0), m = 0..cap
  std::vector<double> std_error;
  double tail_mass = 0.0;
  std::uint64_t replicates = 0;
  double effective_events = 0.0;
};
TransitionFrequencies conditioned_transition(const EnvironmentModel& model, std::uint64_t l, std::size_t horizon,
                                             std::size_t cap, const EstimatorConfig& cfg);

struct QProcessRun {
  unsigned k = 1;
  std::size_t horizon = 0;
  Regime regime = Regime::strongly_subcritical;
  bool approximation = false;  // WS: finite-horizon conditioning
  std::size_t lookahead = 0;   // p in Z_. | Z_{horizon + p} > 0
  std::vector<double> median;  // weighted median of Y_t, t = 0..horizon
  std::vector<double> mean;
  std::size_t cap = kDefaultStateCap;
  std::vector<double> pmf;  // law of Y_horizon, index 0..cap
  std::vector<double> std_error;
  double tail_mass = 0.0;
  std::uint64_t replicates = 0;
  double effective_events = 0.0;
  Method method = Method::direct_sim;
};
inline constexpr std::size_t kWsLookahead = 10;

// SS/IS: exact kernel chain. WS: Z conditioned on survival to horizon + lookahead,
// with tilted environments. Throws PopulationCapError above population_cap.
QProcessRun qprocess_run(const EnvironmentModel& model, unsigned k, std::size_t horizon, const EstimatorConfig& cfg,
                         std::size_t lookahead = kWsLookahead, std::size_t cap = kDefaultStateCap,
                         std::uint64_t population_cap = kDefaultPopulationCap);

struct EnvPosterior {
  unsigned k = 1;
  std::size_t p = 1;
  std::size_t n = 0;
  std::vector<std::vector<double>> marginal;     // [position][component]
  std::vector<std::vector<double>> marginal_se;
  std::vector<double> joint;  // over component sequences, position 0 most significant; empty when p > 3
  std::vector<double> joint_se;
  std::vector<double> prior;  // component weights
  std::uint64_t replicates = 0;
  double effective_events = 0.0;
  Method method = Method::exact_enum;
};
inline constexpr std::uint64_t kPosteriorEnumLimit = std::uint64_t{1} << 16;

// Law of (f_0, ..., f_{p-1}) given Z_{n+p} > 0 from k individuals. Enumerates
// every environment sequence when there are at most 2^16 of them.
EnvPosterior env_posterior(const EnvironmentModel& model, unsigned k, std::size_t p, std::size_t n,
                           const EstimatorConfig& cfg);

}  // namespace bpre
