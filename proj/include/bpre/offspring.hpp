#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "bpre/rng.hpp"

namespace bpre {

struct Moments {
  double mean;   // f'(1)
  double f2;     // f''(1), second factorial moment
};

/// Linear fractional pgf f(s) = 1 - A/(1-B) + A s / (1 - B s):
/// P(0) = 1 - A/(1-B), P(j) = A B^(j-1) for j >= 1.
struct LinearFractional {
  double A;
  double B;
};

/// An offspring distribution on {0, 1, 2, ...}. Either linear fractional or
/// finitely supported. Immutable; copies share the probability table.
class OffspringLaw {
 public:
  static OffspringLaw linear_fractional(double A, double B);
  static OffspringLaw finite_support(std::vector<double> p);
  // LF law with the given mean and second factorial moment.
  static OffspringLaw linear_fractional_from_moments(double mean, double f2);

  bool is_linear_fractional() const noexcept { return table_ == nullptr; }
  const LinearFractional& lf() const;
  std::span<const double> pmf_table() const;

  double pgf(double s) const;
  // 1 - f(1 - t), evaluated without cancellation.
  double pgf_complement(double t) const;
  // (1 - f(1 - t)) / t for t in (0, 1]; the limit f'(1) at t = 0.
  double complement_ratio(double t) const;

  double prob(std::uint64_t j) const;
  double p_zero() const noexcept { return p_zero_; }
  double mean() const noexcept { return mean_; }
  double log_mean() const noexcept { return log_mean_; }
  double f2() const noexcept { return f2_; }
  Moments moments() const noexcept { return {mean_, f2_}; }

  std::uint64_t sample(Stream& rng) const;
  // Sum of `count` iid draws.
  std::uint64_t sample_sum(std::uint64_t count, Stream& rng) const;
  // A draw conditioned on being >= 1.
  std::uint64_t sample_positive(Stream& rng) const;
  // Sum of `count` iid draws, each conditioned on being >= 1.
  std::uint64_t sample_positive_sum(std::uint64_t count, Stream& rng) const;
  // A draw from the size-biased law j p_j / m.
  std::uint64_t sample_size_biased(Stream& rng) const;

  // Law of the number of children kept when each is kept independently with probability q.
  OffspringLaw thinned(double q) const;

  // P(sum of l iid draws = m) for m = 0..cap.
  std::vector<double> convolution_pmf(std::uint64_t l, std::size_t cap) const;

  std::string describe() const;

  friend bool operator==(const OffspringLaw& a, const OffspringLaw& b);

 private:
  struct Table {
    std::vector<double> p;
    std::vector<double> cdf;
    std::vector<double> tail;  // tail[i] = P(X > i)
  };

  OffspringLaw() = default;
  void finish();

  LinearFractional lf_{0.0, 0.0};
  std::shared_ptr<const Table> table_;
  double p_zero_ = 1.0;
  double mean_ = 0.0;
  double log_mean_ = 0.0;
  double f2_ = 0.0;
};

// Failures before the first success when each trial fails with probability b.
std::uint64_t sample_geometric_failures(double b, Stream& rng);
std::uint64_t sample_binomial(std::uint64_t n, double p, Stream& rng);
// Failures before the given number of successes.
std::uint64_t sample_negative_binomial(std::uint64_t successes, double success_p, Stream& rng);

}  // namespace bpre
