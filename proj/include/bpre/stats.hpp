#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <span>
#include <string>
#include <thread>
#include <vector>

namespace bpre {

enum class Method { direct_sim, env_exact, tilted_is, exact_enum };

std::string to_string(Method m);  // "direct-sim", "env-exact", "tilted-IS", "exact-enum"
Method parse_method(const std::string& name);

/// Monte Carlo point estimate with its standard error.
struct EstimateWithCI {
  std::string estimand;
  double value = 0.0;
  double std_error = 0.0;
  std::uint64_t replicates = 0;
  Method method = Method::env_exact;
  std::uint64_t seed = 0;
};

/// Running mean and co-moment matrix of a fixed-dimension sample, mergeable
/// across chunks (Chan et al. pairwise update).
class SampleStats {
 public:
  explicit SampleStats(std::size_t dim = 0);

  void add(std::span<const double> x);
  void merge(const SampleStats& other);

  std::size_t dim() const noexcept { return mean_.size(); }
  std::uint64_t count() const noexcept { return n_; }
  double mean(std::size_t i) const { return mean_[i]; }
  double min(std::size_t i) const { return min_[i]; }
  double max(std::size_t i) const { return max_[i]; }
  // Unbiased sample covariance.
  double cov(std::size_t i, std::size_t j) const;
  double var(std::size_t i) const { return cov(i, i); }
  double se_mean(std::size_t i) const;
  // mean(i) / mean(j) and its delta-method standard error.
  double ratio(std::size_t i, std::size_t j) const;
  double ratio_se(std::size_t i, std::size_t j) const;
  // (sum x_i)^2 / sum x_i^2, the effective sample size of weights in column i.
  double effective_sample_size(std::size_t i) const;

 private:
  std::uint64_t n_ = 0;
  std::vector<double> mean_;
  std::vector<double> comoment_;  // row-major dim x dim
  std::vector<double> min_, max_;
  std::vector<double> scratch_;
};

// Worker count: BPRE_THREADS if set, else the hardware concurrency.
unsigned worker_count();

inline constexpr std::size_t kDefaultChunk = 1024;

/// Runs visit(rep, acc) for rep in [first, first + reps), one accumulator per
/// chunk, then merges chunk accumulators in index order. The result depends
/// only on (first, reps, chunk), never on the number of workers.
template <class Acc, class Make, class Visit>
Acc replicate_reduce(std::uint64_t first, std::uint64_t reps, Make&& make, Visit&& visit,
                     std::size_t chunk = kDefaultChunk) {
  chunk = std::max<std::size_t>(chunk, 1);
  const std::uint64_t n_chunks = (reps + chunk - 1) / chunk;
  std::vector<Acc> partial;
  partial.reserve(n_chunks);
  for (std::uint64_t c = 0; c < n_chunks; ++c) partial.push_back(make());
  std::atomic<std::uint64_t> next{0};
  std::exception_ptr error;
  std::atomic<bool> failed{false};

  auto work = [&] {
    for (std::uint64_t c = next++; c < n_chunks && !failed; c = next++) {
      try {
        const std::uint64_t lo = first + c * chunk;
        const std::uint64_t hi = std::min(first + reps, lo + chunk);
        for (std::uint64_t r = lo; r < hi; ++r) visit(r, partial[c]);
      } catch (...) {
        if (!failed.exchange(true)) error = std::current_exception();
      }
    }
  };

  const unsigned workers = static_cast<unsigned>(std::min<std::uint64_t>(worker_count(), n_chunks));
  if (workers <= 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < workers; ++t) pool.emplace_back(work);
    for (auto& th : pool) th.join();
  }
  if (error) std::rethrow_exception(error);

  Acc total = make();
  for (const auto& p : partial) total.merge(p);
  return total;
}

/// fn(rep, row) fills one sample row of width `dim`.
template <class F>
SampleStats replicate_stats(std::uint64_t first, std::uint64_t reps, std::size_t dim, F&& fn,
                            std::size_t chunk = kDefaultChunk) {
  return replicate_reduce<SampleStats>(
      first, reps, [dim] { return SampleStats(dim); },
      [&fn, dim](std::uint64_t r, SampleStats& acc) {
        thread_local std::vector<double> buf;
        buf.assign(dim, 0.0);
        fn(r, std::span<double>(buf));
        acc.add(buf);
      },
      chunk);
}

template <class F>
SampleStats replicate_stats(std::uint64_t reps, std::size_t dim, F&& fn, std::size_t chunk = kDefaultChunk) {
  return replicate_stats(0, reps, dim, std::forward<F>(fn), chunk);
}

/// Weighted histogram for self-normalized ratio estimates P(X = j) = E[W 1{X=j}] / E[W].
/// Values above `cap` are pooled into a tail bin.
class WeightedHistogram {
 public:
  explicit WeightedHistogram(std::size_t cap = 0);
  void add(std::uint64_t value, double weight);
  void merge(const WeightedHistogram& other);

  std::size_t cap() const noexcept { return cap_; }
  std::uint64_t count() const noexcept { return n_; }
  double effective_sample_size() const;
  // Estimated probability and standard error of bin j (j = cap + 1 is the tail).
  double probability(std::size_t j) const;
  double probability_se(std::size_t j) const;

 private:
  std::size_t cap_;
  std::uint64_t n_ = 0;
  double sum_w_ = 0.0, sum_w2_ = 0.0;
  std::vector<double> sum_a_, sum_a2_;  // per bin: sum W 1{X=j}, sum W^2 1{X=j}
};

// Least-squares slope of y on x, with its standard error.
struct LinearFit {
  double slope;
  double intercept;
  double slope_se;
  double r_squared;
};
LinearFit fit_line(std::span<const double> x, std::span<const double> y);

// Total variation distance between two pmfs (padded with zeros).
double total_variation(std::span<const double> a, std::span<const double> b);
// Half the sum over bins of the combined standard error sqrt(se_a^2 + se_b^2).
double tv_se_budget(std::span<const double> se_a, std::span<const double> se_b);

// Weighted quantile of (value, weight) pairs.
double weighted_quantile(std::vector<std::pair<double, double>> points, double q);

}  // namespace bpre
