#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <vector>

#include "bpre/environment.hpp"
#include "bpre/regime.hpp"
#include "bpre/simcore.hpp"
#include "bpre/stats.hpp"

namespace bpre {

/// Law of one step X = log m of the walk: finitely many values with weights.
struct StepLaw {
  std::vector<double> values;
  std::vector<double> weights;
};

StepLaw step_law(const EnvironmentModel& model);
// Validates weights (positive, summing to 1 within 1e-12) and finite values.
StepLaw make_step_law(std::vector<double> values, std::vector<double> weights);

// E(exp(theta X)) and its derivative E(X exp(theta X)).
double step_mgf(const StepLaw& law, double theta);
double step_mgf_slope(const StepLaw& law, double theta);
// argmin / min of E(exp(theta X)) over [0, 1]; requires E(X) < 0.
AlphaGamma step_alpha(const StepLaw& law);
// Weights reweighted by exp(theta x) and renormalized.
StepLaw tilt(const StepLaw& law, double theta);

struct WalkPath {
  std::vector<double> steps;     // X_0..X_{n-1}
  std::vector<double> partial;   // S_0 = 0, ..., S_n
};
WalkPath make_walk(std::span<const double> steps);

struct WalkStats {
  std::size_t n = 0;
  double min_from_zero = 0.0;  // min S_i over 0..n, so <= 0
  std::optional<double> min_from_one;  // min S_i over 1..n, empty when n = 0
  // level k -> #{i <= n : k <= S_i - L_n < k + 1}, with L_n the min over 0..n
  std::map<std::int64_t, std::uint64_t> occupation;
  double reflected_sum = 1.0;  // sum_{i=0}^n exp(L_n - S_i)
};

// Slack when flooring S_i - L_n so lattice walks land on their own level.
inline constexpr double kLevelSlack = 1e-9;

WalkStats walk_stats(const WalkPath& path);

// P(L_n >= -x) with L_n the minimum over 0..n. Method direct-sim samples plain
// walks; tilted-IS samples under the tilt by alpha with weight gamma^n exp(-alpha S_n).
EstimateWithCI ln_tail(const StepLaw& law, std::size_t n, double x, const EstimatorConfig& cfg);

struct Lattice {
  double span;                       // lambda
  std::vector<std::int64_t> multiples;  // value_i / lambda
};
// Finds lambda with every value in lambda Z (tolerance 1e-9), trying
// min |value| / q for q = 1..64. Throws ValidationError naming the offending component.
Lattice detect_lattice(const StepLaw& law);

inline constexpr std::size_t kMaxExactHorizon = 64;

// Exact P(L_n >= -x) by dynamic programming over lattice positions. x is
// rounded down to the lattice.
double ln_tail_exact(const StepLaw& law, std::size_t n, double x);

struct OccupationCurve {
  std::size_t n = 0;
  std::int64_t level = 0;
  double x = 0.0;
  std::vector<std::uint64_t> l;
  std::vector<double> value;  // P(N_n(level) >= l | L_n >= -x)
  std::vector<double> std_error;
  std::uint64_t replicates = 0;
  double effective_events = 0.0;
  Method method = Method::tilted_is;
  // least-squares slope of log value against log l over points with l >= 1 and value > 0
  std::optional<LinearFit> loglog;
};

OccupationCurve occupation_curve(const StepLaw& law, std::size_t n, std::int64_t level,
                                 const std::vector<std::uint64_t>& ls, double x, const EstimatorConfig& cfg);
EstimateWithCI occupation_tail(const StepLaw& law, std::size_t n, std::int64_t level, std::uint64_t l, double x,
                               const EstimatorConfig& cfg);

struct ReflectedCell {
  std::size_t n;
  double x;
  std::vector<double> probability;  // P(R <= beta_j | L_n >= -x)
  std::vector<double> std_error;
  double effective_events;
};
struct ReflectedSumReport {
  std::vector<double> beta_grid;
  std::vector<ReflectedCell> cells;
  std::optional<double> beta_hat;  // smallest beta reaching 1/4 in every cell
  Method method = Method::tilted_is;
};

inline constexpr double kReflectedTarget = 0.25;
std::vector<double> default_beta_grid();  // 1, 2, 4, ..., 2^16

// Curve of P(sum_{i<=n} exp(L_n - S_i) <= beta | L_n >= -x) for every (n, x).
ReflectedSumReport reflected_sum_curve(const StepLaw& law, const std::vector<std::size_t>& ns,
                                       const std::vector<double>& xs, const std::vector<double>& beta_grid,
                                       const EstimatorConfig& cfg);
// Same, after checking the hypothesis 0 < alpha < 1/2.
ReflectedSumReport reflected_sum_check(const StepLaw& law, const std::vector<std::size_t>& ns,
                                       const std::vector<double>& xs, const EstimatorConfig& cfg);

struct EnvelopeCell {
  std::size_t n;
  double x;
  double exact;
  double scaled;  // exact / (exp(theta x) n^{-3/2} gamma^n)
  bool fit_half;
};
struct EnvelopeReport {
  double theta = 0.0;
  double c_theta = 0.0;  // max of `scaled` over the fit half
  std::vector<EnvelopeCell> cells;
  bool verified = false;  // every verify-half cell has scaled <= c_theta
};
// Upper envelope c e^{theta x} n^{-3/2} gamma^n on exact DP values. Cells with
// fit(n, x) true are used to fit c; the rest verify it.
template <class Split>
EnvelopeReport envelope_fit(const StepLaw& law, double theta, const std::vector<std::size_t>& ns,
                            const std::vector<double>& xs, Split&& fit);

struct TailShapeReport {
  std::vector<double> xs;
  std::vector<double> scaled_first;   // exact * n^{3/2} gamma^{-n} at the first horizon
  std::vector<double> scaled_second;  // same at the second horizon
  double max_relative_change = 0.0;
  LinearFit affine;  // scaled_second * exp(-alpha x) against x
};
TailShapeReport tail_shape(const StepLaw& law, std::size_t n_first, std::size_t n_second,
                           const std::vector<double>& xs);

// Lower bound (C/2) e^{S'_n - M'} / sum_{i<=n} e^{S'_i - M'} on the quenched
// survival probability, where S' sums log means from the last generation
// backwards, M' = max S'_j and C = 1 / (1 + max f''(1)/f'(1)).
double lienrw_lower_bound(std::span<const double> log_means, double c);

// ---- template implementation

template <class Split>
EnvelopeReport envelope_fit(const StepLaw& law, double theta, const std::vector<std::size_t>& ns,
                            const std::vector<double>& xs, Split&& fit) {
  EnvelopeReport out;
  out.theta = theta;
  const double gamma = step_alpha(law).gamma;
  for (auto n : ns)
    for (double x : xs) {
      const double v = ln_tail_exact(law, n, x);
      const double scale = std::exp(theta * x) * std::pow(double(n), -1.5) * std::pow(gamma, double(n));
      out.cells.push_back({n, x, v, v / scale, static_cast<bool>(fit(n, x))});
    }
  for (const auto& c : out.cells)
    if (c.fit_half) out.c_theta = std::max(out.c_theta, c.scaled);
  out.verified = true;
  for (const auto& c : out.cells)
    if (!c.fit_half && c.scaled > out.c_theta) out.verified = false;
  return out;
}

}  // namespace bpre
