#include "bpre/lfexact.hpp"

#include <algorithm>
#include <sstream>
#include <stdexcept>

#include "bpre/errors.hpp"

namespace bpre {

namespace {
constexpr double kAgreementTol = 1e-10;
}

double iterate_F(std::span<const OffspringLaw> env, double s) {
  if (!(s >= 0.0 && s <= 1.0)) throw std::domain_error("iterate_F argument must lie in [0, 1]");
  for (std::size_t i = env.size(); i-- > 0;) s = env[i].pgf(s);
  return s;
}

double log_survival(std::span<const OffspringLaw> env) {
  return log_survival_by(env.size(), [&](std::size_t i) -> const OffspringLaw& { return env[i]; });
}

double lf_closed_form_log_survival(std::span<const OffspringLaw> env) {
  return lf_closed_form_log_survival_by(env.size(), [&](std::size_t i) -> const OffspringLaw& { return env[i]; });
}

std::vector<double> survival_profile(std::span<const OffspringLaw> env) {
  return survival_profile_by(env.size(), [&](std::size_t i) -> const OffspringLaw& { return env[i]; });
}

QuenchedSurvival quenched_survival(std::span<const OffspringLaw> env, unsigned k) {
  if (k == 0) throw ValidationError("k", "need at least one initial particle");
  QuenchedSurvival out;
  out.n = env.size();
  out.k = k;
  out.log_p = log_survival(env);
  out.p = std::exp(out.log_p);

  const bool all_lf = std::all_of(env.begin(), env.end(), [](const auto& l) { return l.is_linear_fractional(); });
  if (all_lf) {
    const double log_cf = lf_closed_form_log_survival(env);
    out.closed_form_p = std::exp(log_cf);
    const bool both_dead = std::isinf(log_cf) && std::isinf(out.log_p);
    if (!both_dead && std::abs(log_cf - out.log_p) > kAgreementTol) {
      std::ostringstream os;
      os.precision(17);
      os << "closed-form survival " << *out.closed_form_p << " disagrees with pgf iteration " << out.p;
      throw std::logic_error(os.str());
    }
  }
  out.all_survive = std::exp(static_cast<double>(k) * out.log_p);
  out.at_least_one = at_least_one_survives(out.p, k);
  return out;
}

OffspringLaw lf_minorant(const OffspringLaw& law) {
  const auto [m, f2] = law.moments();
  if (!(m > 0.0)) throw ValidationError("law", "minorant needs a positive mean, got " + std::to_string(m));
  const double B = f2 / (m + f2);
  const double A = m * (1.0 - B) * (1.0 - B);
  if (!(B < 1.0) || A + B > 1.0 + 1e-12) {
    std::ostringstream os;
    os << "moments m = " << m << ", f''(1) = " << f2 << " give A = " << A << ", B = " << B;
    throw ValidationError("law", os.str());
  }
  auto minorant = OffspringLaw::linear_fractional(std::min(A, 1.0 - B), B);
  for (int i = 0; i <= 100; ++i) {
    const double s = i / 100.0;
    if (minorant.pgf(s) < law.pgf(s) - 1e-12)
      throw std::logic_error("linear fractional minorant falls below the pgf at s = " + std::to_string(s));
  }
  return minorant;
}

}  // namespace bpre
