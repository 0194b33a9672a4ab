#include "bpre/environment.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "bpre/errors.hpp"

namespace bpre {

EnvironmentModel::EnvironmentModel(std::vector<Component> components) : components_(std::move(components)) {
  if (components_.empty()) throw ValidationError("components", "environment needs at least one component");
  double sum = 0.0;
  for (std::size_t i = 0; i < components_.size(); ++i) {
    const double w = components_[i].weight;
    if (!std::isfinite(w) || w <= 0.0)
      throw ValidationError("components[" + std::to_string(i) + "].weight", "weights must be > 0");
    sum += w;
  }
  if (std::abs(sum - 1.0) > 1e-12)
    throw ValidationError("components", "weights sum to " + std::to_string(sum) + ", not 1");
  cdf_.resize(components_.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < components_.size(); ++i) {
    acc += components_[i].weight;
    cdf_[i] = acc;
  }
  cdf_.back() = 1.0;
}

std::size_t EnvironmentModel::draw_index(Stream& rng) const {
  if (components_.size() == 1) return 0;
  const double u = rng.uniform();
  const auto idx = static_cast<std::size_t>(std::upper_bound(cdf_.begin(), cdf_.end(), u) - cdf_.begin());
  return std::min(idx, components_.size() - 1);
}

bool operator==(const EnvironmentModel& a, const EnvironmentModel& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (!(a.law(i) == b.law(i)) || a.weight(i) != b.weight(i)) return false;
  return true;
}

EnvSequence draw_env(const EnvironmentModel& model, std::size_t n, Stream& rng) {
  EnvSequence env;
  env.reserve(n);
  for (std::size_t i = 0; i < n; ++i) env.push_back(model.law(model.draw_index(rng)));
  return env;
}

std::vector<std::uint32_t> draw_env_indices(const EnvironmentModel& model, std::size_t n, Stream& rng) {
  std::vector<std::uint32_t> idx(n);
  for (auto& i : idx) i = static_cast<std::uint32_t>(model.draw_index(rng));
  return idx;
}

namespace {

double power_of_mean(const OffspringLaw& law, double theta) {
  if (theta == 0.0) return 1.0;
  if (law.mean() == 0.0) return 0.0;
  return std::exp(theta * law.log_mean());
}

}  // namespace

double moment_generating(const EnvironmentModel& model, double theta) {
  return env_expectation(model, [theta](const OffspringLaw& law) { return power_of_mean(law, theta); });
}

double moment_generating_slope(const EnvironmentModel& model, double theta) {
  return env_expectation(model, [theta](const OffspringLaw& law) {
    if (law.mean() == 0.0) return theta == 0.0 ? -std::numeric_limits<double>::infinity() : 0.0;
    return power_of_mean(law, theta) * law.log_mean();
  });
}

TiltResult tilt(const EnvironmentModel& model, double theta) {
  if (!(theta >= 0.0) || !std::isfinite(theta)) throw ValidationError("theta", "tilt exponent must be >= 0");
  if (theta == 0.0) return {model, 1.0};
  for (std::size_t i = 0; i < model.size(); ++i)
    if (model.law(i).mean() == 0.0)
      throw ValidationError("components[" + std::to_string(i) + "]",
                            "cannot tilt a component with zero mean offspring");
  const double z = moment_generating(model, theta);
  std::vector<Component> out;
  out.reserve(model.size());
  for (const auto& c : model.components()) out.push_back({c.law, c.weight * power_of_mean(c.law, theta) / z});
  // Renormalize so the weights meet the 1e-12 sum invariant after rounding.
  const double sum = std::accumulate(out.begin(), out.end(), 0.0,
                                     [](double s, const Component& c) { return s + c.weight; });
  for (auto& c : out) c.weight /= sum;
  return {EnvironmentModel(std::move(out)), z};
}

EnvironmentModel reference_model(const std::string& name, double f2_ratio) {
  auto lf = [f2_ratio](double m) { return OffspringLaw::linear_fractional_from_moments(m, f2_ratio * m); };
  if (name == "ss-ref") return EnvironmentModel({{lf(0.5), 0.5}, {lf(0.25), 0.5}});
  if (name == "is-ref") return EnvironmentModel({{lf(2.0), 0.2}, {lf(0.25), 0.8}});
  if (name == "ws-ref") return EnvironmentModel({{lf(std::exp(-2.0)), 0.5}, {lf(std::exp(1.0)), 0.5}});
  throw ValidationError("model", "unknown built-in model '" + name + "'");
}

std::vector<std::string> reference_model_names() { return {"ss-ref", "is-ref", "ws-ref"}; }

EnvironmentModel constant_model(const OffspringLaw& law) { return EnvironmentModel({{law, 1.0}}); }

}  // namespace bpre
