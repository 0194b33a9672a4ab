#include "bpre/limits.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "bpre/errors.hpp"
#include "bpre/lfexact.hpp"
#include "bpre/sampler.hpp"

namespace bpre {

namespace {

void require_k(unsigned k) {
  if (k == 0) throw ValidationError("k", "need at least one initial particle");
}

// Binomial(k, q) conditioned on being >= 1: the index J of the first success
// is a geometric truncated to 1..k, the trials after it are unconstrained.
std::uint64_t sample_binomial_positive(std::uint64_t k, double q, Stream& rng) {
  if (q >= 1.0) return k;
  const double log_fail = std::log1p(-q);
  const double reach = -std::expm1(static_cast<double>(k) * log_fail);  // P(J <= k)
  const double u = rng.uniform();
  auto j = static_cast<std::uint64_t>(std::ceil(std::log1p(-u * reach) / log_fail));
  j = std::clamp<std::uint64_t>(j, 1, k);
  return 1 + sample_binomial(k - j, q, rng);
}

// Draw from weights[x] by inversion.
std::uint64_t sample_from(const std::vector<double>& weights, double total, Stream& rng) {
  double u = rng.uniform() * total;
  for (std::size_t x = 0; x < weights.size(); ++x) {
    u -= weights[x];
    if (u < 0.0) return x;
  }
  for (std::size_t x = weights.size(); x-- > 0;)
    if (weights[x] > 0.0) return x;
  return 0;
}

struct Population {
  std::uint64_t surviving = 0;  // individuals with descendants at the horizon
  std::uint64_t doomed = 0;
  std::uint64_t total() const { return surviving + doomed; }
};

// One generation of the process conditioned on survival to the horizon, where
// q_next is the survival probability of an individual of the next generation.
// Surviving individuals have at least one surviving child; doomed individuals
// only doomed children. With track_doomed false the doomed part is skipped.
Population conditioned_step(const OffspringLaw& law, const Population& cur, double q_next, bool track_doomed,
                            Stream& rng) {
  Population next;
  const double c = 1.0 - q_next;
  if (law.is_linear_fractional()) {
    next.surviving = cur.surviving ? law.thinned(q_next).sample_positive_sum(cur.surviving, rng) : 0;
    if (!track_doomed) return next;
    const auto [A, B] = law.lf();
    const double bc = B * c;
    // each survivor with y surviving children has NegBin(y + 1, 1 - Bc) doomed ones
    if (cur.surviving) next.doomed = sample_negative_binomial(next.surviving + cur.surviving, 1.0 - bc, rng);
    if (cur.doomed) {
      const double fc = law.pgf(c);
      const double nonzero_p = fc > 0.0 ? (A * c / (1.0 - bc)) / fc : 0.0;
      const std::uint64_t nonzero = sample_binomial(cur.doomed, std::min(1.0, nonzero_p), rng);
      next.doomed += nonzero + sample_negative_binomial(nonzero, 1.0 - bc, rng);
    }
    return next;
  }
  const auto p = law.pmf_table();
  if (!track_doomed) {
    next.surviving = cur.surviving ? law.thinned(q_next).sample_positive_sum(cur.surviving, rng) : 0;
    return next;
  }
  std::vector<double> live(p.size()), dead(p.size());
  double live_total = 0.0, dead_total = 0.0;
  for (std::size_t x = 0; x < p.size(); ++x) {
    const double cx = std::pow(c, static_cast<double>(x));
    live[x] = p[x] * (1.0 - cx);
    dead[x] = p[x] * cx;
    live_total += live[x];
    dead_total += dead[x];
  }
  for (std::uint64_t i = 0; i < cur.surviving; ++i) {
    const std::uint64_t x = sample_from(live, live_total, rng);
    const std::uint64_t s = sample_binomial_positive(x, q_next, rng);
    next.surviving += s;
    next.doomed += x - s;
  }
  for (std::uint64_t i = 0; i < cur.doomed; ++i) next.doomed += sample_from(dead, dead_total, rng);
  return next;
}

struct ConditionedPath {
  double weight = 0.0;  // likelihood ratio times P_k(survival to the horizon | env)
  std::vector<std::uint32_t> env;
  std::vector<double> q;  // q_0..q_N
};

ConditionedPath draw_conditioned_env(const EnvSampler& sampler, unsigned k, std::size_t horizon,
                                     std::uint64_t seed, std::uint64_t rep) {
  ConditionedPath out;
  Stream rng(seed, rep, Purpose::environment);
  const double log_w = sampler.draw(horizon, rng, out.env);
  out.q = survival_profile_by(horizon, [&](std::size_t i) -> const OffspringLaw& { return sampler.law(out.env[i]); });
  out.weight = std::exp(log_w) * at_least_one_survives(out.q[0], k);
  return out;
}

double tilt_for(const EnvironmentModel& model, Method method) {
  if (method == Method::tilted_is) return solve_alpha(model).alpha;
  if (method == Method::env_exact) return 0.0;
  throw ValidationError("method", "conditioned sampling needs env-exact or tilted-IS");
}

struct HistogramPgf {
  WeightedHistogram hist;
  WeightedHistogram size_biased;
  SampleStats pgf;
  void merge(const HistogramPgf& o) {
    hist.merge(o.hist);
    size_biased.merge(o.size_biased);
    pgf.merge(o.pgf);
  }
};

}  // namespace

std::vector<double> pgf_grid() {
  std::vector<double> g;
  for (int i = 0; i <= 20; ++i) g.push_back(i / 20.0);
  return g;
}

YaglomEstimate yaglom(const EnvironmentModel& model, unsigned k, std::size_t n, const EstimatorConfig& cfg,
                      std::size_t cap) {
  require_k(k);
  if (cap == 0) throw ValidationError("cap", "state cap must be >= 1");
  YaglomEstimate out;
  out.k = k;
  out.n = n;
  out.cap = cap;
  out.s_grid = pgf_grid();
  out.method = cfg.method ? *cfg.method : default_conditioning_method(model);
  const EnvSampler sampler(model, tilt_for(model, out.method));
  const std::size_t ng = out.s_grid.size();

  auto acc = conditioned_reduce<HistogramPgf>(
      cfg, [&] { return HistogramPgf{WeightedHistogram(cap), WeightedHistogram(cap), SampleStats(ng + 1)}; },
      [&](std::uint64_t rep, HistogramPgf& a) {
        thread_local std::vector<double> row;
        row.assign(ng + 1, 0.0);
        const auto path = draw_conditioned_env(sampler, k, n, cfg.seed, rep);
        std::uint64_t z = 0;
        if (path.weight > 0.0) {
          Stream rng(cfg.seed, rep, Purpose::population);
          Population pop{sample_binomial_positive(k, path.q[0], rng), 0};
          for (std::size_t i = 0; i < n && pop.surviving <= kDefaultPopulationCap; ++i)
            pop = conditioned_step(sampler.law(path.env[i]), pop, path.q[i + 1], false, rng);
          z = pop.surviving;
          row[0] = path.weight;
          for (std::size_t j = 0; j < ng; ++j) row[j + 1] = path.weight * std::pow(out.s_grid[j], double(z));
        }
        a.hist.add(z, path.weight);
        a.size_biased.add(z, path.weight * double(z));
        a.pgf.add(row);
      },
      [](const HistogramPgf& a) { return a.hist.effective_sample_size(); });

  out.pmf.assign(cap + 1, 0.0);
  out.std_error.assign(cap + 1, 0.0);
  out.size_biased.assign(cap + 1, 0.0);
  out.size_biased_se.assign(cap + 1, 0.0);
  for (std::size_t j = 1; j <= cap; ++j) {
    out.pmf[j] = acc.hist.probability(j);
    out.std_error[j] = acc.hist.probability_se(j);
    out.size_biased[j] = acc.size_biased.probability(j);
    out.size_biased_se[j] = acc.size_biased.probability_se(j);
  }
  out.tail_mass = acc.hist.probability(cap + 1);
  for (std::size_t j = 0; j < ng; ++j) {
    out.pgf.push_back(acc.pgf.ratio(j + 1, 0));
    out.pgf_se.push_back(acc.pgf.ratio_se(j + 1, 0));
  }
  out.replicates = acc.hist.count();
  out.effective_events = acc.hist.effective_sample_size();
  return out;
}

MonotoneCubic::MonotoneCubic(std::vector<double> x, std::vector<double> y) : x_(std::move(x)), y_(std::move(y)) {
  const std::size_t n = x_.size();
  if (n < 2 || y_.size() != n) throw ValidationError("grid", "interpolation needs at least two matching points");
  std::vector<double> delta(n - 1);
  for (std::size_t i = 0; i + 1 < n; ++i) {
    if (!(x_[i + 1] > x_[i])) throw ValidationError("grid", "interpolation nodes must increase");
    delta[i] = (y_[i + 1] - y_[i]) / (x_[i + 1] - x_[i]);
  }
  d_.assign(n, 0.0);
  d_[0] = delta[0];
  d_[n - 1] = delta[n - 2];
  for (std::size_t i = 1; i + 1 < n; ++i)
    d_[i] = delta[i - 1] * delta[i] <= 0.0 ? 0.0 : 0.5 * (delta[i - 1] + delta[i]);
  for (std::size_t i = 0; i + 1 < n; ++i) {
    if (delta[i] == 0.0) {
      d_[i] = d_[i + 1] = 0.0;
      continue;
    }
    const double a = d_[i] / delta[i], b = d_[i + 1] / delta[i];
    const double r = a * a + b * b;
    if (r > 9.0) {
      const double t = 3.0 / std::sqrt(r);
      d_[i] = t * a * delta[i];
      d_[i + 1] = t * b * delta[i];
    }
  }
}

double MonotoneCubic::operator()(double t) const {
  if (t <= x_.front()) return y_.front();
  if (t >= x_.back()) return y_.back();
  const std::size_t i = static_cast<std::size_t>(std::upper_bound(x_.begin(), x_.end(), t) - x_.begin()) - 1;
  const double h = x_[i + 1] - x_[i];
  const double u = (t - x_[i]) / h;
  const double u2 = u * u, u3 = u2 * u;
  return (2 * u3 - 3 * u2 + 1) * y_[i] + (u3 - 2 * u2 + u) * h * d_[i] + (-2 * u3 + 3 * u2) * y_[i + 1] +
         (u3 - u2) * h * d_[i + 1];
}

FunctionalResidual functional_residual(const std::vector<double>& s_grid, const std::vector<double>& g,
                                       const EnvironmentModel& model, double gamma) {
  const MonotoneCubic G(s_grid, g);
  FunctionalResidual out;
  out.s_grid = s_grid;
  for (std::size_t j = 0; j < s_grid.size(); ++j) {
    const double s = s_grid[j];
    const double lhs = env_expectation(model, [&](const OffspringLaw& f) { return G(f.pgf(s)); });
    const double r = std::abs(lhs - gamma * g[j] - (1.0 - gamma));
    out.residual.push_back(r);
    out.max_residual = std::max(out.max_residual, r);
  }
  return out;
}

FunctionalResidual functional_residual(const YaglomEstimate& estimate, const EnvironmentModel& model, double gamma) {
  return functional_residual(estimate.s_grid, estimate.pgf, model, gamma);
}

QKernelRow qprocess_kernel(const EnvironmentModel& model, std::uint64_t l, std::size_t cap) {
  if (l == 0) throw ValidationError("l", "state must be >= 1");
  const auto report = classify(model);
  if (report.regime == Regime::weakly_subcritical)
    throw ValidationError("model", "exact Q-process kernel is only available in the SS and IS regimes");
  QKernelRow row;
  row.l = l;
  row.cap = cap;
  row.prob.assign(cap + 1, 0.0);
  for (const auto& c : model.components()) {
    const auto conv = c.law.convolution_pmf(l, cap);
    for (std::size_t m = 1; m <= cap; ++m) row.prob[m] += c.weight * conv[m];
  }
  const double scale = 1.0 / (report.e_m * static_cast<double>(l));
  double sum = 0.0;
  for (std::size_t m = 1; m <= cap; ++m) sum += row.prob[m] *= static_cast<double>(m) * scale;
  row.tail_mass = std::max(0.0, 1.0 - sum);
  return row;
}

ProductFormulaCheck product_formula_check(const EnvironmentModel& model, unsigned k) {
  require_k(k);
  if (k > 2) throw ValidationError("k", "enumeration fixture supports k <= 2");
  std::size_t support = 0;
  for (std::size_t i = 0; i < model.size(); ++i) {
    if (model.law(i).is_linear_fractional() || model.law(i).pmf_table().size() > 3)
      throw ValidationError("components[" + std::to_string(i) + "]",
                            "enumeration fixture needs finite support within {0, 1, 2}");
    support = std::max(support, model.law(i).pmf_table().size() - 1);
  }
  const double gamma = classify(model).e_m;

  // P(sum of `count` individual draws = total) for law i, enumerating every tuple.
  auto enumerate = [&](std::size_t comp, std::uint64_t count) {
    const auto p = model.law(comp).pmf_table();
    std::vector<double> out(count * support + 1, 0.0);
    std::vector<std::size_t> tuple(count, 0);
    while (true) {
      double prob = 1.0;
      std::size_t sum = 0;
      for (auto x : tuple) {
        prob *= p[x];
        sum += x;
      }
      out[sum] += prob;
      std::size_t pos = 0;
      while (pos < count && ++tuple[pos] > support) tuple[pos++] = 0;
      if (pos == count) break;
    }
    return out;
  };

  const std::size_t max_a = k * support, max_b = max_a * support;
  std::vector<std::vector<double>> joint(max_a + 1, std::vector<double>(max_b + 1, 0.0));
  for (std::size_t i = 0; i < model.size(); ++i) {
    const auto first = enumerate(i, k);
    for (std::size_t a = 1; a < first.size(); ++a) {
      for (std::size_t j = 0; j < model.size(); ++j) {
        const auto second = enumerate(j, a);
        for (std::size_t b = 1; b < second.size(); ++b)
          joint[a][b] += model.weight(i) * model.weight(j) * first[a] * second[b];
      }
    }
  }

  ProductFormulaCheck out;
  out.k = k;
  const auto from_k = qprocess_kernel(model, k, max_b);
  for (std::size_t a = 1; a <= max_a; ++a) {
    const auto from_a = qprocess_kernel(model, a, max_b);
    for (std::size_t b = 1; b <= max_b; ++b) {
      const double kernel = from_k.prob[a] * from_a.prob[b];
      const double direct = joint[a][b] * double(b) / (double(k) * gamma * gamma);
      out.max_abs_difference = std::max(out.max_abs_difference, std::abs(kernel - direct));
      ++out.pairs;
    }
  }
  return out;
}

TransitionFrequencies conditioned_transition(const EnvironmentModel& model, std::uint64_t l, std::size_t horizon,
                                             std::size_t cap, const EstimatorConfig& cfg) {
  if (l == 0) throw ValidationError("l", "state must be >= 1");
  if (l > 64) throw ValidationError("l", "conditioned transitions support l <= 64");
  const Method method = cfg.method ? *cfg.method : default_conditioning_method(model);
  const EnvSampler sampler(model, tilt_for(model, method));
  const std::size_t total_n = horizon + 1;
  auto hist = conditioned_reduce<WeightedHistogram>(
      cfg, [cap] { return WeightedHistogram(cap); },
      [&](std::uint64_t rep, WeightedHistogram& h) {
        const auto path = draw_conditioned_env(sampler, static_cast<unsigned>(l), total_n, cfg.seed, rep);
        if (path.weight <= 0.0) {
          h.add(0, 0.0);
          return;
        }
        Stream rng(cfg.seed, rep, Purpose::population);
        const std::uint64_t s = sample_binomial_positive(l, path.q[0], rng);
        const Population next = conditioned_step(sampler.law(path.env[0]), {s, l - s}, path.q[1], true, rng);
        h.add(next.total(), path.weight);
      },
      [](const WeightedHistogram& h) { return h.effective_sample_size(); });
  TransitionFrequencies out;
  out.l = l;
  out.horizon = horizon;
  for (std::size_t m = 0; m <= cap; ++m) {
    out.prob.push_back(hist.probability(m));
    out.std_error.push_back(hist.probability_se(m));
  }
  out.tail_mass = hist.probability(cap + 1);
  out.replicates = hist.count();
  out.effective_events = hist.effective_sample_size();
  return out;
}

namespace {

[[noreturn]] void throw_cap(std::uint64_t rep, std::size_t t, std::uint64_t size, std::uint64_t cap) {
  std::ostringstream os;
  os << "replicate " << rep << " reached " << size << " individuals at generation " << t << " (cap " << cap << ")";
  throw PopulationCapError(os.str());
}

struct TrajectoryAcc {
  std::vector<std::vector<std::pair<double, double>>> points;  // per generation (value, weight)
  WeightedHistogram last;
  void merge(const TrajectoryAcc& o) {
    for (std::size_t t = 0; t < points.size(); ++t)
      points[t].insert(points[t].end(), o.points[t].begin(), o.points[t].end());
    last.merge(o.last);
  }
};

}  // namespace

QProcessRun qprocess_run(const EnvironmentModel& model, unsigned k, std::size_t horizon, const EstimatorConfig& cfg,
                         std::size_t lookahead, std::size_t cap, std::uint64_t population_cap) {
  require_k(k);
  QProcessRun out;
  out.k = k;
  out.horizon = horizon;
  out.cap = cap;
  out.regime = classify(model).regime;
  auto make = [&] {
    return TrajectoryAcc{std::vector<std::vector<std::pair<double, double>>>(horizon + 1), WeightedHistogram(cap)};
  };
  TrajectoryAcc acc;

  if (out.regime != Regime::weakly_subcritical) {
    out.method = Method::direct_sim;
    // Y' = one size-biased draw plus Y - 1 ordinary draws, under a component
    // picked with probability proportional to w_i m_i.
    std::vector<double> cdf;
    double total = 0.0;
    for (const auto& c : model.components()) cdf.push_back(total += c.weight * c.law.mean());
    for (auto& v : cdf) v /= total;
    cdf.back() = 1.0;
    acc = replicate_reduce<TrajectoryAcc>(0, cfg.reps, make, [&](std::uint64_t rep, TrajectoryAcc& a) {
      Stream rng(cfg.seed, rep, Purpose::chain);
      std::uint64_t y = k;
      a.points[0].emplace_back(double(y), 1.0);
      for (std::size_t t = 1; t <= horizon; ++t) {
        const double u = rng.uniform();
        const auto i = std::min<std::size_t>(std::upper_bound(cdf.begin(), cdf.end(), u) - cdf.begin(),
                                             cdf.size() - 1);
        const auto& law = model.law(i);
        y = law.sample_size_biased(rng) + law.sample_sum(y - 1, rng);
        if (y > population_cap) throw_cap(rep, t, y, population_cap);
        a.points[t].emplace_back(double(y), 1.0);
      }
      a.last.add(y, 1.0);
    }, cfg.chunk);
  } else {
    out.approximation = true;
    out.lookahead = lookahead;
    out.method = cfg.method.value_or(Method::tilted_is);
    const EnvSampler sampler(model, tilt_for(model, out.method));
    const std::size_t total_n = horizon + lookahead;
    acc = conditioned_reduce<TrajectoryAcc>(cfg, make, [&](std::uint64_t rep, TrajectoryAcc& a) {
      const auto path = draw_conditioned_env(sampler, k, total_n, cfg.seed, rep);
      Stream rng(cfg.seed, rep, Purpose::population);
      Population pop{0, k};
      if (path.weight > 0.0) {
        const std::uint64_t s = sample_binomial_positive(k, path.q[0], rng);
        pop = {s, k - s};
      }
      a.points[0].emplace_back(double(pop.total()), path.weight);
      for (std::size_t t = 1; t <= horizon; ++t) {
        if (path.weight > 0.0) {
          pop = conditioned_step(sampler.law(path.env[t - 1]), pop, path.q[t], true, rng);
          if (pop.total() > population_cap) throw_cap(rep, t, pop.total(), population_cap);
        }
        a.points[t].emplace_back(double(pop.total()), path.weight);
      }
      a.last.add(pop.total(), path.weight);
    }, [](const TrajectoryAcc& a) { return a.last.effective_sample_size(); });
  }

  for (const auto& gen : acc.points) {
    out.median.push_back(weighted_quantile(gen, 0.5));
    double sw = 0.0, swy = 0.0;
    for (const auto& [v, w] : gen) {
      sw += w;
      swy += w * v;
    }
    out.mean.push_back(sw > 0.0 ? swy / sw : 0.0);
  }
  out.pmf.assign(cap + 1, 0.0);
  out.std_error.assign(cap + 1, 0.0);
  for (std::size_t j = 0; j <= cap; ++j) {
    out.pmf[j] = acc.last.probability(j);
    out.std_error[j] = acc.last.probability_se(j);
  }
  out.tail_mass = acc.last.probability(cap + 1);
  out.replicates = acc.last.count();
  out.effective_events = acc.last.effective_sample_size();
  return out;
}

EnvPosterior env_posterior(const EnvironmentModel& model, unsigned k, std::size_t p, std::size_t n,
                           const EstimatorConfig& cfg) {
  require_k(k);
  if (p == 0 || p > 5) throw ValidationError("p", "prefix length must lie in 1..5");
  if (n + p > 25) throw ValidationError("n", "n + p must not exceed 25");
  EnvPosterior out;
  out.k = k;
  out.p = p;
  out.n = n;
  const std::size_t c = model.size();
  for (std::size_t i = 0; i < c; ++i) out.prior.push_back(model.weight(i));
  const bool with_joint = p <= 3;
  std::size_t joint_size = 1;
  for (std::size_t i = 0; i < p; ++i) joint_size *= c;
  if (!with_joint) joint_size = 0;
  const std::size_t horizon = n + p;
  auto joint_index = [&](std::span<const std::uint32_t> idx) {
    std::size_t j = 0;
    for (std::size_t pos = 0; pos < p; ++pos) j = j * c + idx[pos];
    return j;
  };

  out.marginal.assign(p, std::vector<double>(c, 0.0));
  out.marginal_se.assign(p, std::vector<double>(c, 0.0));
  out.joint.assign(joint_size, 0.0);
  out.joint_se.assign(joint_size, 0.0);

  const bool exact = !cfg.method || *cfg.method == Method::exact_enum;
  if (exact && env_sequence_count(model, horizon) <= kPosteriorEnumLimit) {
    out.method = Method::exact_enum;
    double total = 0.0;
    for_each_env_sequence(model, horizon, [&](std::span<const std::uint32_t> idx, double prob) {
      const double lp = log_survival_by(horizon, [&](std::size_t i) -> const OffspringLaw& { return model.law(idx[i]); });
      const double w = prob * at_least_one_survives(std::exp(lp), k);
      total += w;
      for (std::size_t pos = 0; pos < p; ++pos) out.marginal[pos][idx[pos]] += w;
      if (with_joint) out.joint[joint_index(idx)] += w;
    }, kPosteriorEnumLimit);
    if (!(total > 0.0)) throw ConditioningStarvation("survival to the horizon has probability 0");
    for (auto& row : out.marginal)
      for (auto& v : row) v /= total;
    for (auto& v : out.joint) v /= total;
    out.replicates = env_sequence_count(model, horizon);
    out.effective_events = std::numeric_limits<double>::infinity();
    return out;
  }
  if (cfg.method && *cfg.method == Method::exact_enum)
    throw ValidationError("method", "exact enumeration needs at most 2^16 environment sequences");

  out.method = cfg.method ? *cfg.method : default_conditioning_method(model);
  const EnvSampler sampler(model, tilt_for(model, out.method));
  const std::size_t dim = 1 + p * c + joint_size;
  auto s = conditioned_stats(dim, 0, cfg, [&](std::uint64_t rep, std::span<double> row) {
    const auto path = draw_conditioned_env(sampler, k, horizon, cfg.seed, rep);
    row[0] = path.weight;
    for (std::size_t pos = 0; pos < p; ++pos) row[1 + pos * c + path.env[pos]] = path.weight;
    if (with_joint) row[1 + p * c + joint_index(path.env)] = path.weight;
  });
  for (std::size_t pos = 0; pos < p; ++pos)
    for (std::size_t i = 0; i < c; ++i) {
      out.marginal[pos][i] = s.ratio(1 + pos * c + i, 0);
      out.marginal_se[pos][i] = s.ratio_se(1 + pos * c + i, 0);
    }
  for (std::size_t j = 0; j < joint_size; ++j) {
    out.joint[j] = s.ratio(1 + p * c + j, 0);
    out.joint_se[j] = s.ratio_se(1 + p * c + j, 0);
  }
  out.replicates = s.count();
  out.effective_events = s.effective_sample_size(0);
  return out;
}

}  // namespace bpre
