#include <boost/math/special_functions/gamma.hpp>
#include <cmath>
#include <cstdlib>

#include "bpre/environment.hpp"
#include "bpre/errors.hpp"
#include "bpre/simcore.hpp"
#include "doctest.h"
#include "oracles.hpp"

using namespace bpre;

namespace {

const OffspringLaw kGeo = OffspringLaw::linear_fractional(0.25, 0.5);

// Survival probability of one lineage for every environment sequence, by plain pgf composition.
template <class Fn>
void enumerate_survival(const EnvironmentModel& model, std::size_t n, Fn&& fn) {
  std::vector<double> w;
  for (const auto& c : model.components()) w.push_back(c.weight);
  oracle::for_each_sequence(w, n, [&](const std::vector<std::size_t>& idx, double prob) {
    std::vector<std::function<double(double)>> pgfs;
    for (auto i : idx) {
      const auto lf = model.law(i).lf();
      pgfs.push_back([lf](double s) { return oracle::lf_pgf(lf.A, lf.B, s); });
    }
    fn(prob, oracle::survival(pgfs));
  });
}

double exact_survival(const EnvironmentModel& model, unsigned k, std::size_t n) {
  double total = 0.0;
  enumerate_survival(model, n, [&](double prob, double p) { total += prob * (1.0 - std::pow(1.0 - p, k)); });
  return total;
}

double binom(unsigned k, unsigned j) {
  double c = 1.0;
  for (unsigned i = 1; i <= j; ++i) c = c * (k - j + i) / i;
  return c;
}

EstimatorConfig config(std::uint64_t seed, std::uint64_t reps, std::optional<Method> method = std::nullopt) {
  EstimatorConfig cfg;
  cfg.seed = seed;
  cfg.reps = reps;
  cfg.method = method;
  return cfg;
}

struct ThreadsGuard {
  explicit ThreadsGuard(const char* value) { setenv("BPRE_THREADS", value, 1); }
  ~ThreadsGuard() { unsetenv("BPRE_THREADS"); }
};

}  // namespace

TEST_CASE("simulate_lineages examples and invariants") {
  const auto ss = reference_model("ss-ref");
  Stream rng(1);
  const auto zero = simulate_lineages(ss, 3, 0, rng);
  CHECK(zero.alive == 3);
  CHECK(zero.total == 3);
  CHECK(zero.env.empty());
  for (std::uint64_t rep = 0; rep < 500; ++rep) {
    Stream r(2, rep);
    const auto t = simulate_lineages(ss, 4, 12, r);
    REQUIRE(t.pops.size() == 13);
    CHECK(t.env.size() == 12);
    for (unsigned i = 0; i < 4; ++i)
      for (std::size_t g = 1; g <= 12; ++g)
        if (t.pops[g - 1][i] == 0) CHECK(t.pops[g][i] == 0);
    std::uint64_t sum = 0;
    unsigned alive = 0;
    for (auto z : t.pops.back()) sum += z, alive += z > 0;
    CHECK(sum == t.total);
    CHECK(alive == t.alive);
  }
  CHECK_THROWS_AS(simulate_lineages(ss, 0, 3, rng), ValidationError);
}

TEST_CASE("population cap raises an error") {
  const auto big = constant_model(OffspringLaw::finite_support({0.0, 0.0, 0.0, 0.0, 1.0}));
  Stream rng(3);
  CHECK_THROWS_AS(simulate_lineages(big, 1, 20, rng, 1000), PopulationCapError);
}

TEST_CASE("Bernoulli environment survives with probability 2^-n and zero error") {
  const auto model = constant_model(OffspringLaw::finite_support({0.5, 0.5}));
  const auto e = annealed_survival(model, 1, 10, config(4, 1000));
  CHECK(e.value == doctest::Approx(std::ldexp(1.0, -10)).epsilon(1e-13));
  CHECK(e.std_error == 0.0);
}

TEST_CASE("survival from k = 0 is rejected and n = 0 is certain") {
  const auto ss = reference_model("ss-ref");
  CHECK_THROWS_AS(annealed_survival(ss, 0, 5, config(1, 10)), ValidationError);
  CHECK(annealed_survival(ss, 2, 0, config(1, 10)).value == 1.0);
  CHECK_THROWS_AS(annealed_survival(ss, 1, 5, config(1, 0)), ValidationError);
}

TEST_CASE("annealed survival against exact enumeration") {
  for (const auto& name : reference_model_names()) {
    const auto model = reference_model(name);
    for (unsigned k : {1u, 3u}) {
      const std::size_t n = 12;
      const double exact = exact_survival(model, k, n);
      const auto en = annealed_survival(model, k, n, config(5, 1, Method::exact_enum));
      CHECK(en.value == doctest::Approx(exact).epsilon(1e-10));
      for (Method m : {Method::env_exact, Method::tilted_is}) {
        const auto est = annealed_survival(model, k, n, config(6, 40'000, m));
        CHECK(std::abs(est.value - exact) <= 4.0 * est.std_error);
      }
      const auto direct = annealed_survival(model, k, 6, config(7, 200'000, Method::direct_sim));
      CHECK(std::abs(direct.value - exact_survival(model, k, 6)) <= 4.0 * direct.std_error);
    }
  }
}

TEST_CASE("joint survival examples") {
  const auto model = constant_model(kGeo);
  CHECK(joint_survival(model, 2, 2, config(1, 100)).value == doctest::Approx(1.0 / 9.0).epsilon(1e-13));

  // SS decay rate E(m^2) = 5/32 per generation
  const auto ss = reference_model("ss-ref");
  const double a = joint_survival(ss, 2, 16, config(1, 1, Method::exact_enum)).value;
  const double b = joint_survival(ss, 2, 17, config(1, 1, Method::exact_enum)).value;
  CHECK(std::abs(std::log(b / a) - std::log(5.0 / 32.0)) <= 0.02);

  for (const auto& name : reference_model_names()) {
    const auto model2 = reference_model(name);
    double exact = 0.0;
    enumerate_survival(model2, 10, [&](double prob, double p) { exact += prob * p * p * p; });
    const auto est = joint_survival(model2, 3, 10, config(8, 40'000, Method::tilted_is));
    CHECK(std::abs(est.value - exact) <= 4.0 * est.std_error);
  }
}

TEST_CASE("inclusion-exclusion agrees pathwise") {
  for (unsigned k = 1; k <= 4; ++k) {
    const auto r = inclusion_exclusion_check(reference_model("ws-ref"), k, 15, config(9, 5000));
    CHECK(r.max_pathwise_difference <= 1e-12);
    CHECK(std::abs(r.direct.value - r.alternating.value) <= 1e-12);
  }
  CHECK_THROWS_AS(inclusion_exclusion_check(reference_model("ws-ref"), 7, 15, config(9, 10)), ValidationError);
}

TEST_CASE("alpha_k curve") {
  const auto ss = reference_model("ss-ref");
  const auto one = alpha_k_curve(ss, {1}, {5, 10}, config(10, 2000));
  for (const auto& p : one.points) CHECK(p.value == doctest::Approx(1.0).epsilon(1e-14));
  CHECK_THROWS_AS(alpha_k_curve(ss, {2}, {10, 5}, config(10, 10)), ValidationError);

  // finite-n ratio against exact enumeration
  const auto curve = alpha_k_curve(ss, {2, 3}, {12}, config(11, 50'000));
  for (const auto& p : curve.points) {
    const double exact = exact_survival(ss, p.k, 12) / exact_survival(ss, 1, 12);
    CHECK(std::abs(p.value - exact) <= 4.0 * p.combined_se);
    CHECK(p.value >= 1.0);
    CHECK(p.value <= double(p.k));
  }
}

TEST_CASE("conditional lineage counts against exact enumeration") {
  const std::size_t n = 12;
  const unsigned k = 3;
  for (const auto& name : reference_model_names()) {
    const auto model = reference_model(name);
    std::vector<double> num(k + 1, 0.0);
    double den = 0.0;
    enumerate_survival(model, n, [&](double prob, double p) {
      den += prob * (1.0 - std::pow(1.0 - p, k));
      for (unsigned j = 1; j <= k; ++j) num[j] += prob * binom(k, j) * std::pow(p, j) * std::pow(1.0 - p, k - j);
    });
    const auto d = conditional_lineage_counts(model, k, n, config(12, 40'000));
    CHECK(d.pmf[0] == 0.0);
    double total = 0.0;
    for (unsigned j = 1; j <= k; ++j) {
      total += d.pmf[j];
      CHECK(std::abs(d.pmf[j] - num[j] / den) <= 4.0 * d.std_error[j] + 1e-12);
    }
    CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("environment selection against exact enumeration") {
  const std::size_t n = 12;
  const unsigned k = 2;
  const std::vector<double> eps = {0.0, 0.001, 0.01, 0.1};
  for (const auto& name : reference_model_names()) {
    const auto model = reference_model(name);
    std::vector<double> num(eps.size(), 0.0);
    double den = 0.0;
    enumerate_survival(model, n, [&](double prob, double p) {
      const double w = prob * (1.0 - (1.0 - p) * (1.0 - p));
      den += w;
      for (std::size_t j = 0; j < eps.size(); ++j)
        if (p >= eps[j]) num[j] += w;
    });
    const auto curve = conditional_env_survival(model, k, n, eps, config(13, 40'000));
    CHECK(curve.value[0] == doctest::Approx(1.0).epsilon(1e-12));
    for (std::size_t j = 0; j < eps.size(); ++j) CHECK(std::abs(curve.value[j] - num[j] / den) <= 4.0 * curve.std_error[j] + 1e-12);
    for (std::size_t j = 1; j < eps.size(); ++j) CHECK(curve.value[j] <= curve.value[j - 1] + 1e-15);
  }
  CHECK_THROWS_AS(conditional_env_survival(reference_model("ss-ref"), 1, 5, {1.5}, config(1, 10)), ValidationError);
}

TEST_CASE("conditioning starvation is reported") {
  const auto model = EnvironmentModel({{OffspringLaw::finite_support({1.0}), 0.99}, {kGeo, 0.01}});
  CHECK_THROWS_AS(conditional_lineage_counts(model, 1, 50, config(14, 100, Method::env_exact)),
                  ConditioningStarvation);
}

TEST_CASE("simulated lineage counts match the binomial mixture (chi-square)") {
  const auto ss = reference_model("ss-ref");
  const unsigned k = 3;
  const std::size_t n = 6;
  const std::uint64_t reps = 100'000;
  std::vector<double> exact(k + 1, 0.0);
  enumerate_survival(ss, n, [&](double prob, double p) {
    for (unsigned j = 0; j <= k; ++j) exact[j] += prob * binom(k, j) * std::pow(p, j) * std::pow(1.0 - p, k - j);
  });
  const auto sim = simulated_lineage_count_pmf(ss, k, n, config(15, reps));
  double chi2 = 0.0;
  for (unsigned j = 0; j <= k; ++j) {
    const double expected = exact[j] * reps, observed = sim[j] * reps;
    chi2 += (observed - expected) * (observed - expected) / expected;
  }
  const double p_value = boost::math::gamma_q(k / 2.0, chi2 / 2.0);
  CHECK(p_value > 0.001);

  const auto mix = binomial_mixture_lineage_count_pmf(ss, k, n, config(16, 100'000));
  for (unsigned j = 0; j <= k; ++j) CHECK(std::abs(mix[j] - exact[j]) <= 0.01);
}

TEST_CASE("results do not depend on the worker count") {
  const auto ws = reference_model("ws-ref");
  EstimateWithCI a, b;
  std::vector<double> pa, pb;
  {
    ThreadsGuard g("1");
    a = annealed_survival(ws, 2, 20, config(17, 20'000, Method::tilted_is));
    pa = conditional_lineage_counts(ws, 3, 20, config(18, 5000)).pmf;
  }
  {
    ThreadsGuard g("4");
    b = annealed_survival(ws, 2, 20, config(17, 20'000, Method::tilted_is));
    pb = conditional_lineage_counts(ws, 3, 20, config(18, 5000)).pmf;
  }
  CHECK(a.value == b.value);
  CHECK(a.std_error == b.std_error);
  CHECK(pa == pb);
}

TEST_CASE("default conditioning method follows the regime") {
  CHECK(default_conditioning_method(reference_model("ss-ref")) == Method::env_exact);
  CHECK(default_conditioning_method(reference_model("is-ref")) == Method::tilted_is);
  CHECK(default_conditioning_method(reference_model("ws-ref")) == Method::tilted_is);
  CHECK(parse_method("tilted-IS") == Method::tilted_is);
  CHECK(to_string(Method::exact_enum) == "exact-enum");
  CHECK_THROWS_AS(parse_method("bogus"), ValidationError);
}
