#include "bpre/rwalk.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "bpre/errors.hpp"

namespace bpre {

namespace {

constexpr double kThetaTol = 1e-12;
constexpr double kLatticeTol = 1e-9;

// Same slack on the barrier so lattice paths touching -x count as above it.
bool above(double s, double barrier) { return s >= barrier - kLevelSlack; }

class StepSampler {
 public:
  explicit StepSampler(const StepLaw& law) : values_(law.values) {
    double acc = 0.0;
    for (double w : law.weights) cdf_.push_back(acc += w);
    cdf_.back() = 1.0;
  }
  double draw(Stream& rng) const {
    const double u = rng.uniform();
    const auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
    return values_[std::min<std::size_t>(it - cdf_.begin(), values_.size() - 1)];
  }

 private:
  std::vector<double> values_;
  std::vector<double> cdf_;
};

// Tilt used by the importance-sampled walk estimators, or nullopt when the
// tilt by alpha would leave the walk with negative drift.
struct WalkTilt {
  double theta;
  double log_gamma;
  StepLaw sampling;
};

std::optional<WalkTilt> centered_tilt(const StepLaw& law) {
  const auto ag = step_alpha(law);
  const double drift = step_mgf_slope(law, ag.alpha) / ag.gamma;
  if (drift < -kRegimeTieTolerance) return std::nullopt;
  return WalkTilt{ag.alpha, std::log(ag.gamma), tilt(law, ag.alpha)};
}

struct WalkDriver {
  StepSampler sampler;
  double theta = 0.0;
  double log_gamma = 0.0;

  // Fills S_0..S_n; returns the likelihood ratio back to the base law.
  double draw(std::size_t n, Stream& rng, std::vector<double>& s) const {
    s.assign(n + 1, 0.0);
    for (std::size_t i = 0; i < n; ++i) s[i + 1] = s[i] + sampler.draw(rng);
    if (theta == 0.0) return 1.0;
    return std::exp(double(n) * log_gamma - theta * s[n]);
  }
};

WalkDriver make_driver(const StepLaw& law, Method method) {
  if (method == Method::direct_sim) return {StepSampler(law), 0.0, 0.0};
  if (method != Method::tilted_is) throw ValidationError("method", "walk estimators support direct-sim or tilted-IS");
  const auto t = centered_tilt(law);
  if (!t)
    throw ValidationError("method",
                          "tilted-IS needs a centered tilt; the minimizer over [0,1] is at 1 with negative tilted drift");
  return {StepSampler(t->sampling), t->theta, t->log_gamma};
}

Method default_walk_method(const StepLaw& law) {
  return centered_tilt(law) ? Method::tilted_is : Method::direct_sim;
}

void require_x(double x) {
  if (!(x >= 0.0) || !std::isfinite(x)) throw ValidationError("x", "barrier depth must be finite and >= 0");
}

}  // namespace

StepLaw make_step_law(std::vector<double> values, std::vector<double> weights) {
  if (values.empty() || values.size() != weights.size())
    throw ValidationError("steps", "need matching nonempty value and weight lists");
  double total = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!std::isfinite(values[i]))
      throw ValidationError("steps[" + std::to_string(i) + "]", "step value must be finite");
    if (!(weights[i] > 0.0)) throw ValidationError("weights[" + std::to_string(i) + "]", "weight must be > 0");
    total += weights[i];
  }
  if (std::abs(total - 1.0) > 1e-12) throw ValidationError("weights", "weights must sum to 1");
  for (auto& w : weights) w /= total;
  return {std::move(values), std::move(weights)};
}

StepLaw step_law(const EnvironmentModel& model) {
  std::vector<double> v, w;
  for (std::size_t i = 0; i < model.size(); ++i) {
    if (model.law(i).mean() <= 0.0)
      throw ValidationError("components[" + std::to_string(i) + "]", "log-mean walk needs every mean > 0");
    v.push_back(model.law(i).log_mean());
    w.push_back(model.weight(i));
  }
  return {std::move(v), std::move(w)};
}

double step_mgf(const StepLaw& law, double theta) {
  double acc = 0.0;
  for (std::size_t i = 0; i < law.values.size(); ++i) acc += law.weights[i] * std::exp(theta * law.values[i]);
  return acc;
}

double step_mgf_slope(const StepLaw& law, double theta) {
  double acc = 0.0;
  for (std::size_t i = 0; i < law.values.size(); ++i)
    acc += law.weights[i] * law.values[i] * std::exp(theta * law.values[i]);
  return acc;
}

AlphaGamma step_alpha(const StepLaw& law) {
  const double drift = step_mgf_slope(law, 0.0);
  if (!(drift < 0.0)) throw ValidationError("steps", "walk must have negative drift, E(X) = " + std::to_string(drift));
  if (step_mgf_slope(law, 1.0) <= kRegimeTieTolerance) return {1.0, step_mgf(law, 1.0)};
  double lo = 0.0, hi = 1.0;
  while (hi - lo > kThetaTol) {
    const double mid = 0.5 * (lo + hi);
    (step_mgf_slope(law, mid) > 0.0 ? hi : lo) = mid;
  }
  const double a = 0.5 * (lo + hi);
  return {a, step_mgf(law, a)};
}

StepLaw tilt(const StepLaw& law, double theta) {
  StepLaw out = law;
  const double z = step_mgf(law, theta);
  for (std::size_t i = 0; i < out.values.size(); ++i) out.weights[i] *= std::exp(theta * out.values[i]) / z;
  return out;
}

WalkPath make_walk(std::span<const double> steps) {
  WalkPath p;
  p.steps.assign(steps.begin(), steps.end());
  p.partial.assign(steps.size() + 1, 0.0);
  for (std::size_t i = 0; i < steps.size(); ++i) p.partial[i + 1] = p.partial[i] + steps[i];
  return p;
}

WalkStats walk_stats(const WalkPath& path) {
  WalkStats st;
  const auto& s = path.partial;
  st.n = s.empty() ? 0 : s.size() - 1;
  if (s.empty()) return st;
  st.min_from_zero = *std::min_element(s.begin(), s.end());
  if (s.size() > 1) st.min_from_one = *std::min_element(s.begin() + 1, s.end());
  double sum = 0.0, comp = 0.0;
  for (double v : s) {
    const double d = v - st.min_from_zero;
    ++st.occupation[static_cast<std::int64_t>(std::floor(d + kLevelSlack))];
    const double term = std::exp(-d);
    const double t = sum + term;
    comp += std::abs(sum) >= std::abs(term) ? (sum - t) + term : (term - t) + sum;
    sum = t;
  }
  st.reflected_sum = sum + comp;
  return st;
}

EstimateWithCI ln_tail(const StepLaw& law, std::size_t n, double x, const EstimatorConfig& cfg) {
  require_x(x);
  if (cfg.reps == 0) throw ValidationError("reps", "need at least one replicate");
  const Method method = cfg.method ? *cfg.method : default_walk_method(law);
  std::ostringstream name;
  name << "P(L_" << n << ">=-" << x << ")";
  if (n == 0) return {name.str(), 1.0, 0.0, cfg.reps, method, cfg.seed};
  const WalkDriver driver = make_driver(law, method);
  auto s = replicate_stats(cfg.reps, 1, [&](std::uint64_t rep, std::span<double> row) {
    thread_local std::vector<double> path;
    Stream rng(cfg.seed, rep, Purpose::walk);
    const double w = driver.draw(n, rng, path);
    row[0] = above(*std::min_element(path.begin(), path.end()), -x) ? w : 0.0;
  }, cfg.chunk);
  return {name.str(), s.mean(0), s.se_mean(0), s.count(), method, cfg.seed};
}

Lattice detect_lattice(const StepLaw& law) {
  double smallest = std::numeric_limits<double>::infinity();
  for (double v : law.values)
    if (v != 0.0) smallest = std::min(smallest, std::abs(v));
  if (!std::isfinite(smallest)) return {1.0, std::vector<std::int64_t>(law.values.size(), 0)};
  std::size_t offender = 0;
  for (int q = 1; q <= 64; ++q) {
    const double span = smallest / q;
    Lattice lat{span, {}};
    bool ok = true;
    for (std::size_t i = 0; i < law.values.size() && ok; ++i) {
      const double r = law.values[i] / span;
      const double k = std::round(r);
      if (std::abs(r - k) > kLatticeTol) {
        ok = false;
        if (q == 1) offender = i;
      }
      lat.multiples.push_back(static_cast<std::int64_t>(k));
    }
    if (ok) return lat;
  }
  std::ostringstream os;
  os << "step " << law.values[offender] << " of component " << offender
     << " is not on a common lattice with the smallest step " << smallest;
  throw ValidationError("components[" + std::to_string(offender) + "]", os.str());
}

double ln_tail_exact(const StepLaw& law, std::size_t n, double x) {
  require_x(x);
  if (n > kMaxExactHorizon)
    throw ValidationError("n", "exact lattice tail supports n <= " + std::to_string(kMaxExactHorizon));
  if (n == 0) return 1.0;
  const Lattice lat = detect_lattice(law);
  const auto depth = static_cast<std::int64_t>(std::floor(x / lat.span + kLatticeTol));
  std::int64_t up = 0;
  for (auto m : lat.multiples) up = std::max(up, m);
  const std::int64_t lo = -depth, hi = static_cast<std::int64_t>(n) * up;
  const std::size_t width = static_cast<std::size_t>(hi - lo + 1);
  std::vector<long double> cur(width, 0.0L), next(width);
  cur[static_cast<std::size_t>(-lo)] = 1.0L;
  for (std::size_t step = 0; step < n; ++step) {
    std::fill(next.begin(), next.end(), 0.0L);
    for (std::size_t j = 0; j < width; ++j) {
      if (cur[j] == 0.0L) continue;
      for (std::size_t c = 0; c < lat.multiples.size(); ++c) {
        const std::int64_t pos = static_cast<std::int64_t>(j) + lo + lat.multiples[c];
        if (pos < lo || pos > hi) continue;
        next[static_cast<std::size_t>(pos - lo)] += cur[j] * static_cast<long double>(law.weights[c]);
      }
    }
    cur.swap(next);
  }
  long double total = 0.0L;
  for (auto v : cur) total += v;
  return static_cast<double>(total);
}

OccupationCurve occupation_curve(const StepLaw& law, std::size_t n, std::int64_t level,
                                 const std::vector<std::uint64_t>& ls, double x, const EstimatorConfig& cfg) {
  require_x(x);
  if (level < 0) throw ValidationError("level", "occupation level must be >= 0");
  OccupationCurve out;
  out.n = n;
  out.level = level;
  out.x = x;
  out.l = ls;
  out.method = cfg.method ? *cfg.method : default_walk_method(law);
  const WalkDriver driver = make_driver(law, out.method);
  const std::size_t m = ls.size();
  // column 0: w 1{L_n >= -x}; column 1 + j: same times 1{N_n(level) >= l_j}
  auto s = conditioned_stats(m + 1, 0, cfg, [&](std::uint64_t rep, std::span<double> row) {
    thread_local std::vector<double> path;
    Stream rng(cfg.seed, rep, Purpose::walk);
    const double w = driver.draw(n, rng, path);
    const double low = *std::min_element(path.begin(), path.end());
    if (!above(low, -x)) return;
    std::uint64_t count = 0;
    for (double v : path)
      if (static_cast<std::int64_t>(std::floor(v - low + kLevelSlack)) == level) ++count;
    row[0] = w;
    for (std::size_t j = 0; j < m; ++j) row[j + 1] = count >= ls[j] ? w : 0.0;
  });
  std::vector<double> lx, ly;
  for (std::size_t j = 0; j < m; ++j) {
    out.value.push_back(s.ratio(j + 1, 0));
    out.std_error.push_back(s.ratio_se(j + 1, 0));
    if (ls[j] >= 1 && out.value.back() > 0.0) {
      lx.push_back(std::log(double(ls[j])));
      ly.push_back(std::log(out.value.back()));
    }
  }
  if (lx.size() >= 2) out.loglog = fit_line(lx, ly);
  out.replicates = s.count();
  out.effective_events = s.effective_sample_size(0);
  return out;
}

EstimateWithCI occupation_tail(const StepLaw& law, std::size_t n, std::int64_t level, std::uint64_t l, double x,
                               const EstimatorConfig& cfg) {
  const auto c = occupation_curve(law, n, level, {l}, x, cfg);
  std::ostringstream name;
  name << "P(N_" << n << "(" << level << ")>=" << l << "|L_" << n << ">=-" << x << ")";
  return {name.str(), c.value[0], c.std_error[0], c.replicates, c.method, cfg.seed};
}

std::vector<double> default_beta_grid() {
  std::vector<double> g;
  for (int i = 0; i <= 16; ++i) g.push_back(std::ldexp(1.0, i));
  return g;
}

ReflectedSumReport reflected_sum_curve(const StepLaw& law, const std::vector<std::size_t>& ns,
                                       const std::vector<double>& xs, const std::vector<double>& beta_grid,
                                       const EstimatorConfig& cfg) {
  if (xs.empty() || ns.empty() || beta_grid.empty())
    throw ValidationError("grid", "need at least one n, x and beta");
  for (double x : xs) require_x(x);
  ReflectedSumReport out;
  out.beta_grid = beta_grid;
  out.method = cfg.method ? *cfg.method : default_walk_method(law);
  const WalkDriver driver = make_driver(law, out.method);
  const std::size_t nx = xs.size(), nb = beta_grid.size();
  // the smallest x has the rarest conditioning event; escalate on it
  const std::size_t hardest = static_cast<std::size_t>(std::min_element(xs.begin(), xs.end()) - xs.begin());
  for (auto n : ns) {
    // columns: per x, the weight then one column per beta
    auto s = conditioned_stats(nx * (nb + 1), hardest * (nb + 1), cfg, [&](std::uint64_t rep, std::span<double> row) {
      thread_local std::vector<double> path;
      Stream rng(cfg.seed, rep, Purpose::walk);
      const double w = driver.draw(n, rng, path);
      const double low = *std::min_element(path.begin(), path.end());
      double r = 0.0;
      for (double v : path) r += std::exp(low - v);
      for (std::size_t ix = 0; ix < nx; ++ix) {
        if (!above(low, -xs[ix])) continue;
        row[ix * (nb + 1)] = w;
        for (std::size_t b = 0; b < nb; ++b)
          if (r <= beta_grid[b]) row[ix * (nb + 1) + 1 + b] = w;
      }
    });
    for (std::size_t ix = 0; ix < nx; ++ix) {
      ReflectedCell cell{n, xs[ix], {}, {}, s.effective_sample_size(ix * (nb + 1))};
      for (std::size_t b = 0; b < nb; ++b) {
        cell.probability.push_back(s.ratio(ix * (nb + 1) + 1 + b, ix * (nb + 1)));
        cell.std_error.push_back(s.ratio_se(ix * (nb + 1) + 1 + b, ix * (nb + 1)));
      }
      out.cells.push_back(std::move(cell));
    }
  }
  for (std::size_t b = 0; b < nb && !out.beta_hat; ++b) {
    bool all = true;
    for (const auto& c : out.cells) all = all && c.probability[b] >= kReflectedTarget;
    if (all) out.beta_hat = beta_grid[b];
  }
  return out;
}

ReflectedSumReport reflected_sum_check(const StepLaw& law, const std::vector<std::size_t>& ns,
                                       const std::vector<double>& xs, const EstimatorConfig& cfg) {
  const auto ag = step_alpha(law);
  if (!(ag.alpha < 0.5) || step_mgf_slope(law, 1.0) <= kRegimeTieTolerance) {
    std::ostringstream os;
    os << "needs a weakly subcritical walk with alpha < 1/2, got alpha = " << ag.alpha;
    throw ValidationError("model", os.str());
  }
  return reflected_sum_curve(law, ns, xs, default_beta_grid(), cfg);
}

TailShapeReport tail_shape(const StepLaw& law, std::size_t n_first, std::size_t n_second,
                           const std::vector<double>& xs) {
  TailShapeReport out;
  out.xs = xs;
  const auto ag = step_alpha(law);
  auto scaled = [&](std::size_t n, double x) {
    return ln_tail_exact(law, n, x) * std::pow(double(n), 1.5) * std::pow(ag.gamma, -double(n));
  };
  std::vector<double> u;
  for (double x : xs) {
    out.scaled_first.push_back(scaled(n_first, x));
    out.scaled_second.push_back(scaled(n_second, x));
    const double a = out.scaled_first.back(), b = out.scaled_second.back();
    out.max_relative_change = std::max(out.max_relative_change, std::abs(b - a) / b);
    u.push_back(b * std::exp(-ag.alpha * x));
  }
  out.affine = fit_line(xs, u);
  return out;
}

double lienrw_lower_bound(std::span<const double> log_means, double c) {
  const std::size_t n = log_means.size();
  std::vector<double> rev(n + 1, 0.0);  // S'_0..S'_n
  for (std::size_t i = 1; i <= n; ++i) rev[i] = rev[i - 1] + log_means[n - i];
  const double top = *std::max_element(rev.begin(), rev.end());
  double denom = 0.0;
  for (double v : rev) denom += std::exp(v - top);
  return 0.5 * c * std::exp(rev[n] - top) / denom;
}

}  // namespace bpre
