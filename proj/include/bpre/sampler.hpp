#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "bpre/environment.hpp"
#include "bpre/rng.hpp"

namespace bpre {

/// Draws environment paths either from the model itself (theta = 0) or from
/// its exponential tilt by m^theta. Each draw reports the log of the
/// likelihood ratio n log E(m^theta) - theta S_n that maps tilted
/// expectations back to the base model.
class EnvSampler {
 public:
  EnvSampler(const EnvironmentModel& base, double theta);

  double draw(std::size_t n, Stream& rng, std::vector<std::uint32_t>& out) const;

  const EnvironmentModel& base() const noexcept { return base_; }
  const EnvironmentModel& sampling_model() const noexcept { return sampling_; }
  double theta() const noexcept { return theta_; }
  double log_normalizer() const noexcept { return log_z_; }
  const OffspringLaw& law(std::uint32_t i) const { return base_.law(i); }

 private:
  EnvironmentModel base_;
  EnvironmentModel sampling_;
  double theta_;
  double log_z_;
};

// Calls fn(indices, probability) for every component sequence of length n.
// Rejects enumerations with more than `limit` sequences.
void for_each_env_sequence(const EnvironmentModel& model, std::size_t n,
                           const std::function<void(std::span<const std::uint32_t>, double)>& fn,
                           std::uint64_t limit = std::uint64_t{1} << 22);

// Number of component sequences of length n, saturating at UINT64_MAX.
std::uint64_t env_sequence_count(const EnvironmentModel& model, std::size_t n);

}  // namespace bpre
