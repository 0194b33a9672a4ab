#include "bpre/sampler.hpp"

#include <cmath>
#include <limits>

#include "bpre/errors.hpp"

namespace bpre {

EnvSampler::EnvSampler(const EnvironmentModel& base, double theta)
    : base_(base), sampling_(base), theta_(theta), log_z_(0.0) {
  if (theta != 0.0) {
    auto t = tilt(base, theta);
    sampling_ = std::move(t.model);
    log_z_ = std::log(t.normalizer);
  }
}

double EnvSampler::draw(std::size_t n, Stream& rng, std::vector<std::uint32_t>& out) const {
  out.resize(n);
  double s = 0.0;
  for (auto& idx : out) {
    idx = static_cast<std::uint32_t>(sampling_.draw_index(rng));
    s += base_.law(idx).log_mean();
  }
  if (theta_ == 0.0) return 0.0;
  return static_cast<double>(n) * log_z_ - theta_ * s;
}

std::uint64_t env_sequence_count(const EnvironmentModel& model, std::size_t n) {
  std::uint64_t count = 1;
  const std::uint64_t c = model.size();
  for (std::size_t i = 0; i < n; ++i) {
    if (count > std::numeric_limits<std::uint64_t>::max() / c) return std::numeric_limits<std::uint64_t>::max();
    count *= c;
  }
  return count;
}

void for_each_env_sequence(const EnvironmentModel& model, std::size_t n,
                           const std::function<void(std::span<const std::uint32_t>, double)>& fn,
                           std::uint64_t limit) {
  const std::uint64_t total = env_sequence_count(model, n);
  if (total > limit)
    throw ValidationError("n", "exact enumeration needs " + std::to_string(total) + " sequences, limit is " +
                                   std::to_string(limit));
  std::vector<std::uint32_t> idx(n, 0);
  const auto c = static_cast<std::uint32_t>(model.size());
  for (std::uint64_t seq = 0; seq < total; ++seq) {
    double prob = 1.0;
    for (auto i : idx) prob *= model.weight(i);
    fn(idx, prob);
    for (std::size_t pos = 0; pos < n; ++pos) {
      if (++idx[pos] < c) break;
      idx[pos] = 0;
    }
  }
}

}  // namespace bpre
