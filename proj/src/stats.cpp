#include "bpre/stats.hpp"

#include <cstdlib>
#include <limits>
#include <numeric>

#include "bpre/errors.hpp"

namespace bpre {

std::string to_string(Method m) {
  switch (m) {
    case Method::direct_sim: return "direct-sim";
    case Method::env_exact: return "env-exact";
    case Method::tilted_is: return "tilted-IS";
    case Method::exact_enum: return "exact-enum";
  }
  return "?";
}

Method parse_method(const std::string& name) {
  if (name == "direct-sim" || name == "direct") return Method::direct_sim;
  if (name == "env-exact") return Method::env_exact;
  if (name == "tilted-IS" || name == "tilted-is") return Method::tilted_is;
  if (name == "exact-enum") return Method::exact_enum;
  throw ValidationError("method", "unknown method '" + name + "'");
}

SampleStats::SampleStats(std::size_t dim)
    : mean_(dim, 0.0),
      comoment_(dim * dim, 0.0),
      min_(dim, std::numeric_limits<double>::infinity()),
      max_(dim, -std::numeric_limits<double>::infinity()) {}

void SampleStats::add(std::span<const double> x) {
  const std::size_t d = dim();
  ++n_;
  const double inv = 1.0 / static_cast<double>(n_);
  // delta before the mean update, x - new mean after
  auto& delta = scratch_;
  delta.resize(d);
  for (std::size_t i = 0; i < d; ++i) {
    delta[i] = x[i] - mean_[i];
    mean_[i] += delta[i] * inv;
    min_[i] = std::min(min_[i], x[i]);
    max_[i] = std::max(max_[i], x[i]);
  }
  for (std::size_t i = 0; i < d; ++i) {
    const double post = x[i] - mean_[i];
    for (std::size_t j = 0; j < d; ++j) comoment_[i * d + j] += post * delta[j];
  }
}

void SampleStats::merge(const SampleStats& other) {
  if (other.n_ == 0) return;
  if (n_ == 0) {
    *this = other;
    return;
  }
  const std::size_t d = dim();
  const double na = static_cast<double>(n_), nb = static_cast<double>(other.n_);
  const double n = na + nb;
  std::vector<double> delta(d);
  for (std::size_t i = 0; i < d; ++i) delta[i] = other.mean_[i] - mean_[i];
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < d; ++j)
      comoment_[i * d + j] += other.comoment_[i * d + j] + delta[i] * delta[j] * na * nb / n;
  for (std::size_t i = 0; i < d; ++i) {
    mean_[i] += delta[i] * nb / n;
    min_[i] = std::min(min_[i], other.min_[i]);
    max_[i] = std::max(max_[i], other.max_[i]);
  }
  n_ += other.n_;
}

double SampleStats::cov(std::size_t i, std::size_t j) const {
  if (n_ < 2) return 0.0;
  return comoment_[i * dim() + j] / static_cast<double>(n_ - 1);
}

double SampleStats::se_mean(std::size_t i) const {
  if (n_ < 2) return 0.0;
  return std::sqrt(std::max(0.0, var(i)) / static_cast<double>(n_));
}

double SampleStats::ratio(std::size_t i, std::size_t j) const { return mean_[i] / mean_[j]; }

double SampleStats::ratio_se(std::size_t i, std::size_t j) const {
  if (n_ < 2 || mean_[j] == 0.0) return 0.0;
  const double r = ratio(i, j);
  const double v = var(i) - 2.0 * r * cov(i, j) + r * r * var(j);
  return std::sqrt(std::max(0.0, v) / static_cast<double>(n_)) / std::abs(mean_[j]);
}

double SampleStats::effective_sample_size(std::size_t i) const {
  if (n_ == 0) return 0.0;
  const double n = static_cast<double>(n_);
  const double second = mean_[i] * mean_[i] + comoment_[i * dim() + i] / n;
  if (second <= 0.0) return 0.0;
  return n * mean_[i] * mean_[i] / second;
}

unsigned worker_count() {
  if (const char* env = std::getenv("BPRE_THREADS")) {
    const long v = std::strtol(env, nullptr, 10);
    if (v >= 1) return static_cast<unsigned>(v);
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : hw;
}

WeightedHistogram::WeightedHistogram(std::size_t cap) : cap_(cap), sum_a_(cap + 2, 0.0), sum_a2_(cap + 2, 0.0) {}

void WeightedHistogram::add(std::uint64_t value, double weight) {
  const std::size_t bin = value > cap_ ? cap_ + 1 : static_cast<std::size_t>(value);
  ++n_;
  sum_w_ += weight;
  sum_w2_ += weight * weight;
  sum_a_[bin] += weight;
  sum_a2_[bin] += weight * weight;
}

void WeightedHistogram::merge(const WeightedHistogram& other) {
  n_ += other.n_;
  sum_w_ += other.sum_w_;
  sum_w2_ += other.sum_w2_;
  for (std::size_t j = 0; j < sum_a_.size(); ++j) {
    sum_a_[j] += other.sum_a_[j];
    sum_a2_[j] += other.sum_a2_[j];
  }
}

double WeightedHistogram::effective_sample_size() const {
  return sum_w2_ > 0.0 ? sum_w_ * sum_w_ / sum_w2_ : 0.0;
}

double WeightedHistogram::probability(std::size_t j) const {
  return sum_w_ > 0.0 ? sum_a_.at(j) / sum_w_ : 0.0;
}

double WeightedHistogram::probability_se(std::size_t j) const {
  if (n_ < 2 || sum_w_ <= 0.0) return 0.0;
  // Delta method with a = W 1{X=j}, d = W; a d = a^2 since the indicator is 0/1.
  const double n = static_cast<double>(n_);
  const double ma = sum_a_.at(j) / n, md = sum_w_ / n;
  const double r = ma / md;
  const double var_a = sum_a2_[j] / n - ma * ma;
  const double cov_ad = sum_a2_[j] / n - ma * md;
  const double var_d = sum_w2_ / n - md * md;
  const double v = var_a - 2.0 * r * cov_ad + r * r * var_d;
  return std::sqrt(std::max(0.0, v) / (n - 1.0)) / md;
}

LinearFit fit_line(std::span<const double> x, std::span<const double> y) {
  const std::size_t n = x.size();
  if (n < 2 || y.size() != n) throw ValidationError("fit", "need at least two matching points");
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / double(n);
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / double(n);
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  LinearFit f{};
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  double sse = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double r = y[i] - f.intercept - f.slope * x[i];
    sse += r * r;
  }
  f.slope_se = n > 2 ? std::sqrt(sse / double(n - 2) / sxx) : 0.0;
  f.r_squared = syy > 0.0 ? 1.0 - sse / syy : 1.0;
  return f;
}

double total_variation(std::span<const double> a, std::span<const double> b) {
  const std::size_t n = std::max(a.size(), b.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double x = i < a.size() ? a[i] : 0.0;
    const double y = i < b.size() ? b[i] : 0.0;
    acc += std::abs(x - y);
  }
  return 0.5 * acc;
}

double tv_se_budget(std::span<const double> se_a, std::span<const double> se_b) {
  const std::size_t n = std::max(se_a.size(), se_b.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double x = i < se_a.size() ? se_a[i] : 0.0;
    const double y = i < se_b.size() ? se_b[i] : 0.0;
    acc += std::sqrt(x * x + y * y);
  }
  return 0.5 * acc;
}

double weighted_quantile(std::vector<std::pair<double, double>> points, double q) {
  if (points.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(points.begin(), points.end());
  double total = 0.0;
  for (const auto& [v, w] : points) total += w;
  double acc = 0.0;
  for (const auto& [v, w] : points) {
    acc += w;
    if (acc >= q * total) return v;
  }
  return points.back().first;
}

}  // namespace bpre
