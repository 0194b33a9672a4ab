#include "bpre/offspring.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>

#include "bpre/errors.hpp"

namespace bpre {

namespace {

constexpr double kNormTol = 1e-12;

double xlogy(double n, double x) { return n == 0.0 ? 0.0 : n * std::log(x); }

double log_choose(double n, double k) {
  return std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0);
}

void check_unit(double s, const char* what) {
  if (!(s >= 0.0 && s <= 1.0))
    throw std::domain_error(std::string(what) + " must lie in [0, 1], got " + std::to_string(s));
}

}  // namespace

std::uint64_t sample_binomial(std::uint64_t n, double p, Stream& rng) {
  if (n == 0 || p <= 0.0) return 0;
  if (p >= 1.0) return n;
  std::binomial_distribution<std::uint64_t> d(n, p);
  return d(rng);
}

std::uint64_t sample_negative_binomial(std::uint64_t successes, double success_p, Stream& rng) {
  if (successes == 0 || success_p >= 1.0) return 0;
  if (successes <= 8) {
    std::uint64_t total = 0;
    for (std::uint64_t i = 0; i < successes; ++i) total += sample_geometric_failures(1.0 - success_p, rng);
    return total;
  }
  std::negative_binomial_distribution<std::uint64_t> d(successes, success_p);
  return d(rng);
}

std::uint64_t sample_geometric_failures(double b, Stream& rng) {
  if (b <= 0.0) return 0;
  // U in (0, 1]
  const double u = 1.0 - rng.uniform();
  return static_cast<std::uint64_t>(std::floor(std::log(u) / std::log(b)));
}

OffspringLaw OffspringLaw::linear_fractional(double A, double B) {
  if (!(A >= 0.0 && A <= 1.0)) throw ValidationError("A", "must lie in [0, 1]");
  if (!(B >= 0.0 && B < 1.0)) throw ValidationError("B", "must lie in [0, 1)");
  if (A + B > 1.0 + kNormTol) throw ValidationError("A", "A + B must not exceed 1");
  OffspringLaw law;
  law.lf_ = {A, B};
  law.finish();
  return law;
}

OffspringLaw OffspringLaw::linear_fractional_from_moments(double mean, double f2) {
  if (!(mean >= 0.0) || !(f2 >= 0.0)) throw ValidationError("moments", "mean and f2 must be >= 0");
  if (mean == 0.0) return linear_fractional(0.0, 0.0);
  const double B = f2 / (2.0 * mean + f2);
  const double A = mean * (1.0 - B) * (1.0 - B);
  if (A + B > 1.0 + kNormTol) {
    std::ostringstream os;
    os << "no linear fractional law with mean " << mean << " and f''(1) " << f2 << " (A + B = " << A + B
       << " > 1)";
    throw ValidationError("moments", os.str());
  }
  return linear_fractional(std::min(A, 1.0 - B), B);
}

OffspringLaw OffspringLaw::finite_support(std::vector<double> p) {
  if (p.empty()) throw ValidationError("fs", "probability vector is empty");
  double sum = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (!std::isfinite(p[i]) || p[i] < 0.0)
      throw ValidationError("fs[" + std::to_string(i) + "]", "probabilities must be finite and >= 0");
    sum += p[i];
  }
  if (std::abs(sum - 1.0) > kNormTol)
    throw ValidationError("fs", "probabilities sum to " + std::to_string(sum) + ", not 1");
  for (auto& x : p) x /= sum;
  while (p.size() > 1 && p.back() == 0.0) p.pop_back();

  auto table = std::make_shared<Table>();
  table->p = std::move(p);
  const auto& q = table->p;
  table->cdf.resize(q.size());
  std::partial_sum(q.begin(), q.end(), table->cdf.begin());
  table->cdf.back() = 1.0;
  table->tail.assign(q.size() > 1 ? q.size() - 1 : 0, 0.0);
  double acc = 0.0;
  for (std::size_t i = q.size(); i-- > 1;) {
    acc += q[i];
    table->tail[i - 1] = acc;
  }
  OffspringLaw law;
  law.table_ = std::move(table);
  law.finish();
  return law;
}

void OffspringLaw::finish() {
  if (table_) {
    const auto& p = table_->p;
    p_zero_ = p[0];
    double m = 0.0, f2 = 0.0;
    for (std::size_t j = 0; j < p.size(); ++j) {
      const double dj = static_cast<double>(j);
      m += dj * p[j];
      f2 += dj * (dj - 1.0) * p[j];
    }
    mean_ = m;
    f2_ = f2;
  } else {
    const auto [A, B] = lf_;
    p_zero_ = 1.0 - A / (1.0 - B);
    mean_ = A / ((1.0 - B) * (1.0 - B));
    f2_ = 2.0 * A * B / ((1.0 - B) * (1.0 - B) * (1.0 - B));
  }
  log_mean_ = mean_ > 0.0 ? std::log(mean_) : -std::numeric_limits<double>::infinity();
}

const LinearFractional& OffspringLaw::lf() const {
  if (!is_linear_fractional()) throw std::logic_error("offspring law is not linear fractional");
  return lf_;
}

std::span<const double> OffspringLaw::pmf_table() const {
  if (!table_) throw std::logic_error("offspring law has no finite probability table");
  return table_->p;
}

double OffspringLaw::pgf(double s) const {
  check_unit(s, "pgf argument");
  if (s == 1.0) return 1.0;
  if (table_) {
    const auto& p = table_->p;
    double acc = 0.0;
    for (std::size_t j = p.size(); j-- > 0;) acc = acc * s + p[j];
    return acc;
  }
  const auto [A, B] = lf_;
  return 1.0 - A / (1.0 - B) + A * s / (1.0 - B * s);
}

double OffspringLaw::complement_ratio(double t) const {
  check_unit(t, "complement argument");
  if (table_) {
    const double s = 1.0 - t;
    const auto& tail = table_->tail;
    double acc = 0.0;
    for (std::size_t i = tail.size(); i-- > 0;) acc = acc * s + tail[i];
    return acc;
  }
  const auto [A, B] = lf_;
  return A / ((1.0 - B) * (1.0 - B + B * t));
}

double OffspringLaw::pgf_complement(double t) const { return t * complement_ratio(t); }

double OffspringLaw::prob(std::uint64_t j) const {
  if (table_) return j < table_->p.size() ? table_->p[j] : 0.0;
  if (j == 0) return p_zero_;
  const auto [A, B] = lf_;
  if (B == 0.0) return j == 1 ? A : 0.0;
  return A * std::pow(B, static_cast<double>(j - 1));
}

std::uint64_t OffspringLaw::sample(Stream& rng) const {
  const double u = rng.uniform();
  if (table_) {
    const auto& cdf = table_->cdf;
    return static_cast<std::uint64_t>(std::upper_bound(cdf.begin(), cdf.end(), u) - cdf.begin());
  }
  if (u < p_zero_) return 0;
  return 1 + sample_geometric_failures(lf_.B, rng);
}

std::uint64_t OffspringLaw::sample_sum(std::uint64_t count, Stream& rng) const {
  if (count == 0) return 0;
  if (table_) {
    if (count <= 16) {
      std::uint64_t total = 0;
      for (std::uint64_t i = 0; i < count; ++i) total += sample(rng);
      return total;
    }
    // Multinomial counts by successive conditional binomials.
    const auto& p = table_->p;
    std::uint64_t remaining = count, total = 0;
    double rest = 1.0;
    for (std::size_t j = 0; j < p.size() && remaining > 0; ++j) {
      const std::uint64_t nj = (j + 1 == p.size()) ? remaining
                                                   : sample_binomial(remaining, std::min(1.0, p[j] / rest), rng);
      total += nj * j;
      remaining -= nj;
      rest -= p[j];
      if (rest <= 0.0) break;
    }
    return total;
  }
  const auto [A, B] = lf_;
  const std::uint64_t nonzero = sample_binomial(count, A / (1.0 - B), rng);
  return nonzero + sample_negative_binomial(nonzero, 1.0 - B, rng);
}

std::uint64_t OffspringLaw::sample_positive(Stream& rng) const {
  if (p_zero_ >= 1.0) throw std::domain_error("offspring law puts no mass on j >= 1");
  if (table_) {
    const auto& cdf = table_->cdf;
    const double u = p_zero_ + rng.uniform() * (1.0 - p_zero_);
    auto idx = static_cast<std::uint64_t>(std::upper_bound(cdf.begin(), cdf.end(), u) - cdf.begin());
    return std::clamp<std::uint64_t>(idx, 1, cdf.size() - 1);
  }
  return 1 + sample_geometric_failures(lf_.B, rng);
}

std::uint64_t OffspringLaw::sample_positive_sum(std::uint64_t count, Stream& rng) const {
  if (count == 0) return 0;
  if (p_zero_ >= 1.0) throw std::domain_error("offspring law puts no mass on j >= 1");
  if (table_) {
    if (count <= 16) {
      std::uint64_t total = 0;
      for (std::uint64_t i = 0; i < count; ++i) total += sample_positive(rng);
      return total;
    }
    const auto& p = table_->p;
    std::uint64_t remaining = count, total = 0;
    double rest = 1.0 - p_zero_;
    for (std::size_t j = 1; j < p.size() && remaining > 0; ++j) {
      const std::uint64_t nj = (j + 1 == p.size()) ? remaining
                                                   : sample_binomial(remaining, std::min(1.0, p[j] / rest), rng);
      total += nj * j;
      remaining -= nj;
      rest -= p[j];
      if (rest <= 0.0) break;
    }
    return total;
  }
  return count + sample_negative_binomial(count, 1.0 - lf_.B, rng);
}

std::uint64_t OffspringLaw::sample_size_biased(Stream& rng) const {
  if (!(mean_ > 0.0)) throw std::domain_error("size-biased law needs a positive mean");
  if (table_) {
    const auto& p = table_->p;
    double u = rng.uniform() * mean_;
    for (std::size_t j = 1; j < p.size(); ++j) {
      u -= static_cast<double>(j) * p[j];
      if (u < 0.0) return j;
    }
    for (std::size_t j = p.size(); j-- > 1;)
      if (p[j] > 0.0) return j;
    return 1;
  }
  // j (1-B)^2 B^(j-1): one plus a negative binomial with two successes.
  return 1 + sample_geometric_failures(lf_.B, rng) + sample_geometric_failures(lf_.B, rng);
}

OffspringLaw OffspringLaw::thinned(double q) const {
  check_unit(q, "thinning probability");
  if (table_) {
    const auto& p = table_->p;
    std::vector<double> out(p.size(), 0.0);
    for (std::size_t x = 0; x < p.size(); ++x) {
      if (p[x] == 0.0) continue;
      for (std::size_t y = 0; y <= x; ++y) {
        const double lp = log_choose(double(x), double(y)) + xlogy(double(y), q) + xlogy(double(x - y), 1.0 - q);
        out[y] += p[x] * std::exp(lp);
      }
    }
    const double sum = std::accumulate(out.begin(), out.end(), 0.0);
    for (auto& v : out) v /= sum;
    return finite_support(std::move(out));
  }
  const auto [A, B] = lf_;
  const double denom = 1.0 - B + B * q;
  return linear_fractional(A * q / (denom * denom), B * q / denom);
}

std::vector<double> OffspringLaw::convolution_pmf(std::uint64_t l, std::size_t cap) const {
  std::vector<double> out(cap + 1, 0.0);
  if (l == 0) {
    out[0] = 1.0;
    return out;
  }
  if (table_) {
    std::vector<double> acc{1.0};
    const auto& p = table_->p;
    for (std::uint64_t r = 0; r < l; ++r) {
      std::vector<double> next(std::min(acc.size() + p.size() - 1, cap + 1), 0.0);
      for (std::size_t i = 0; i < acc.size(); ++i)
        for (std::size_t j = 0; j < p.size() && i + j < next.size(); ++j) next[i + j] += acc[i] * p[j];
      acc = std::move(next);
    }
    std::copy(acc.begin(), acc.end(), out.begin());
    return out;
  }
  // Binomial(l, a) nonzero families, each contributing 1 + Geometric(1 - B).
  const auto [A, B] = lf_;
  const double a = A / (1.0 - B);
  const double dl = static_cast<double>(l);
  out[0] = a >= 1.0 ? 0.0 : std::exp(dl * std::log1p(-a));
  for (std::size_t m = 1; m <= cap; ++m) {
    double acc = 0.0;
    const std::uint64_t jmax = std::min<std::uint64_t>(l, m);
    for (std::uint64_t j = 1; j <= jmax; ++j) {
      if (B == 0.0 && j != m) continue;
      const double dj = static_cast<double>(j), dm = static_cast<double>(m);
      const double lp = log_choose(dl, dj) + xlogy(dj, a) + xlogy(dl - dj, 1.0 - a) + log_choose(dm - 1.0, dj - 1.0) +
                        xlogy(dm - dj, B) + xlogy(dj, 1.0 - B);
      acc += std::exp(lp);
    }
    out[m] = acc;
  }
  return out;
}

std::string OffspringLaw::describe() const {
  std::ostringstream os;
  os.precision(17);
  if (table_) {
    os << "FS[";
    for (std::size_t j = 0; j < table_->p.size(); ++j) os << (j ? "," : "") << table_->p[j];
    os << "]";
  } else {
    os << "LF(A=" << lf_.A << ",B=" << lf_.B << ")";
  }
  return os.str();
}

bool operator==(const OffspringLaw& a, const OffspringLaw& b) {
  if (a.is_linear_fractional() != b.is_linear_fractional()) return false;
  if (a.is_linear_fractional()) return a.lf_.A == b.lf_.A && a.lf_.B == b.lf_.B;
  return a.table_ == b.table_ || a.table_->p == b.table_->p;
}

}  // namespace bpre
