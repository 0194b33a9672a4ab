#include "bpre/regime.hpp"

#include <cmath>

#include "bpre/errors.hpp"

namespace bpre {

std::string to_string(Regime r) {
  switch (r) {
    case Regime::strongly_subcritical: return "SS";
    case Regime::intermediate_subcritical: return "IS";
    case Regime::weakly_subcritical: return "WS";
  }
  return "?";
}

std::string to_string(JointSurvivalCase c) {
  switch (c) {
    case JointSurvivalCase::decaying: return "i";
    case JointSurvivalCase::boundary: return "ii";
    case JointSurvivalCase::interior: return "iii";
  }
  return "?";
}

namespace {

constexpr double kThetaTol = 1e-12;

void require_subcritical(const EnvironmentModel& model) {
  const double e_log_m = moment_generating_slope(model, 0.0);
  if (!(e_log_m < 0.0)) throw NotSubcriticalError(e_log_m);
}

// theta -> E(m^theta log m) is nondecreasing; find its zero in [lo, hi]
// given a negative value at lo and a positive one at hi.
double bisect_slope(const EnvironmentModel& model, double lo, double hi) {
  while (hi - lo > kThetaTol) {
    const double mid = 0.5 * (lo + hi);
    if (moment_generating_slope(model, mid) > 0.0)
      hi = mid;
    else
      lo = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace

AlphaGamma solve_alpha(const EnvironmentModel& model) {
  require_subcritical(model);
  const double slope_at_one = moment_generating_slope(model, 1.0);
  if (slope_at_one <= kRegimeTieTolerance) return {1.0, moment_generating(model, 1.0)};
  const double alpha = bisect_slope(model, 0.0, 1.0);
  return {alpha, moment_generating(model, alpha)};
}

GammaTilde solve_gamma_tilde(const EnvironmentModel& model, unsigned k) {
  if (k == 0) throw ValidationError("k", "need at least one initial particle");
  require_subcritical(model);
  const double dk = static_cast<double>(k);
  const double slope = moment_generating_slope(model, dk);
  GammaTilde out{k, dk, moment_generating(model, dk), JointSurvivalCase::decaying, slope};
  if (std::abs(slope) <= kRegimeTieTolerance) {
    out.joint_case = JointSurvivalCase::boundary;
  } else if (slope > 0.0) {
    out.joint_case = JointSurvivalCase::interior;
    out.alpha_tilde = bisect_slope(model, 0.0, dk);
    out.gamma_tilde = moment_generating(model, out.alpha_tilde);
  }
  return out;
}

RegimeReport classify(const EnvironmentModel& model, std::optional<unsigned> k) {
  require_subcritical(model);
  RegimeReport r{};
  r.subcritical = true;
  r.e_log_m = moment_generating_slope(model, 0.0);
  r.e_m_log_m = moment_generating_slope(model, 1.0);
  r.e_m = moment_generating(model, 1.0);
  if (std::abs(r.e_m_log_m) <= kRegimeTieTolerance)
    r.regime = Regime::intermediate_subcritical;
  else if (r.e_m_log_m < 0.0)
    r.regime = Regime::strongly_subcritical;
  else
    r.regime = Regime::weakly_subcritical;
  const auto ag = solve_alpha(model);
  r.alpha = ag.alpha;
  r.gamma = ag.gamma;
  if (k) r.k_particle = solve_gamma_tilde(model, *k);
  return r;
}

}  // namespace bpre
