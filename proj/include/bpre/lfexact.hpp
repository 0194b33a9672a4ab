#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "bpre/offspring.hpp"

namespace bpre {

struct QuenchedSurvival {
  std::size_t n = 0;
  unsigned k = 1;
  double p = 1.0;             // 1 - F_n(0)
  double log_p = 0.0;
  double all_survive = 1.0;   // (1 - F_n(0))^k
  double at_least_one = 1.0;  // 1 - F_n(0)^k
  std::optional<double> closed_form_p;  // linear fractional closed form, when every law is LF
};

// F_n(s) = f_0(f_1(...f_{n-1}(s))).
double iterate_F(std::span<const OffspringLaw> env, double s);

// log(1 - F_n(0)) by iterating t -> 1 - f(1 - t) in log space. `law_at(i)`
// returns the law of generation i.
template <class LawAt>
double log_survival_by(std::size_t n, LawAt&& law_at) {
  double log_t = 0.0;
  for (std::size_t i = n; i-- > 0;) {
    const OffspringLaw& law = law_at(i);
    const double ratio = law.complement_ratio(std::exp(log_t));
    if (ratio <= 0.0) return -std::numeric_limits<double>::infinity();
    log_t += std::log(ratio);
  }
  return std::min(log_t, 0.0);
}

double log_survival(std::span<const OffspringLaw> env);

// Linear fractional closed form: 1 - F_n(0) = P_n / (1 + sum_i f''_{n-i-1}(1) / (2 f'_{n-i-1}(1)) P_i),
// with P_i = f'_{n-i}(1)...f'_{n-1}(1), evaluated in log space. Throws if a law is not LF.
template <class LawAt>
double lf_closed_form_log_survival_by(std::size_t n, LawAt&& law_at) {
  double log_prod = 0.0;  // log P_i
  double log_denom = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const OffspringLaw& law = law_at(n - i - 1);
    (void)law.lf();
    if (law.mean() == 0.0) return -std::numeric_limits<double>::infinity();
    const double c = law.f2() / (2.0 * law.mean());
    if (c > 0.0) {
      const double term = std::log(c) + log_prod;
      const double hi = std::max(log_denom, term), lo = std::min(log_denom, term);
      log_denom = hi + std::log1p(std::exp(lo - hi));
    }
    log_prod += law.log_mean();
  }
  return log_prod - log_denom;
}

double lf_closed_form_log_survival(std::span<const OffspringLaw> env);

// q_i = 1 - f_i(f_{i+1}(...f_{n-1}(0))) for i = 0..n, with q_n = 1.
template <class LawAt>
std::vector<double> survival_profile_by(std::size_t n, LawAt&& law_at) {
  std::vector<double> q(n + 1, 1.0);
  for (std::size_t i = n; i-- > 0;) q[i] = law_at(i).pgf_complement(q[i + 1]);
  return q;
}

std::vector<double> survival_profile(std::span<const OffspringLaw> env);

// P(at least one of k lineages survives) given single-lineage survival p.
inline double at_least_one_survives(double p, unsigned k) {
  if (p >= 1.0) return 1.0;
  return -std::expm1(static_cast<double>(k) * std::log1p(-p));
}

// Iterates the pgf for any family; for all-LF environments also evaluates the
// closed form and throws std::logic_error if the two disagree beyond 1e-10.
QuenchedSurvival quenched_survival(std::span<const OffspringLaw> env, unsigned k = 1);

// Linear fractional law f~ with f~ >= f on [0,1], f~'(1) = f'(1), f~''(1) = 2 f''(1).
OffspringLaw lf_minorant(const OffspringLaw& law);

}  // namespace bpre
