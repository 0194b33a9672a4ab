#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "bpre/offspring.hpp"
#include "bpre/rng.hpp"

namespace bpre {

struct Component {
  OffspringLaw law;
  double weight;
};

// Ordered environment f_0, ..., f_{n-1}.
using EnvSequence = std::vector<OffspringLaw>;

/// Finite iid mixture over offspring laws.
class EnvironmentModel {
 public:
  explicit EnvironmentModel(std::vector<Component> components);

  std::span<const Component> components() const noexcept { return components_; }
  std::size_t size() const noexcept { return components_.size(); }
  const OffspringLaw& law(std::size_t i) const { return components_.at(i).law; }
  double weight(std::size_t i) const { return components_.at(i).weight; }

  // Index of a component drawn from the mixture weights.
  std::size_t draw_index(Stream& rng) const;

  friend bool operator==(const EnvironmentModel& a, const EnvironmentModel& b);

 private:
  std::vector<Component> components_;
  std::vector<double> cdf_;
};

struct TiltResult {
  EnvironmentModel model;
  double normalizer;  // E(m^theta) under the original model
};

EnvSequence draw_env(const EnvironmentModel& model, std::size_t n, Stream& rng);
// Same draw, reported as component indices.
std::vector<std::uint32_t> draw_env_indices(const EnvironmentModel& model, std::size_t n, Stream& rng);

// Reweight component i by m_i^theta and renormalize.
TiltResult tilt(const EnvironmentModel& model, double theta);

// Compensated sum of w_i g(law_i).
template <class F>
double env_expectation(const EnvironmentModel& model, F&& g) {
  double sum = 0.0, comp = 0.0;
  for (const auto& c : model.components()) {
    const double term = c.weight * static_cast<double>(g(c.law));
    const double t = sum + term;
    if (std::isfinite(t)) comp += std::abs(sum) >= std::abs(term) ? (sum - t) + term : (term - t) + sum;
    sum = t;
  }
  return std::isfinite(sum) ? sum + comp : sum;
}

// E(m^theta), with 0^0 = 1.
double moment_generating(const EnvironmentModel& model, double theta);
// d/dtheta E(m^theta) = E(m^theta log m).
double moment_generating_slope(const EnvironmentModel& model, double theta);

/// Built-in reference models. Each component is an LF law with the listed mean
/// and f''(1) = f2_ratio * f'(1).
///   ss-ref: m in {1/2, 1/4}, weights (1/2, 1/2)
///   is-ref: m in {2, 1/4},   weights (1/5, 4/5)
///   ws-ref: m in {e^-2, e},  weights (1/2, 1/2)
inline constexpr double kDefaultF2Ratio = 4.0;
EnvironmentModel reference_model(const std::string& name, double f2_ratio = kDefaultF2Ratio);
std::vector<std::string> reference_model_names();

// Single-component model.
EnvironmentModel constant_model(const OffspringLaw& law);

}  // namespace bpre
