#include <cmath>

#include "bpre/environment.hpp"
#include "bpre/errors.hpp"
#include "bpre/sampler.hpp"
#include "doctest.h"
#include "oracles.hpp"

using namespace bpre;

namespace {

EnvironmentModel two_point(double m1, double m2, double w1) {
  return EnvironmentModel({{OffspringLaw::linear_fractional_from_moments(m1, m1), w1},
                           {OffspringLaw::linear_fractional_from_moments(m2, m2), 1.0 - w1}});
}

}  // namespace

TEST_CASE("draw_env examples") {
  const auto ws = reference_model("ws-ref");
  Stream rng(1);
  CHECK(draw_env(ws, 0, rng).empty());
  const auto law = OffspringLaw::linear_fractional(0.25, 0.5);
  const auto single = constant_model(law);
  const auto env = draw_env(single, 5, rng);
  REQUIRE(env.size() == 5);
  for (const auto& f : env) CHECK(f == law);

  const auto half = two_point(0.5, 0.25, 0.5);
  const auto idx = draw_env_indices(half, 100'000, rng);
  double ones = 0.0;
  for (auto i : idx) ones += i == 1 ? 1.0 : 0.0;
  CHECK(std::abs(ones / 1e5 - 0.5) <= 0.005);
}

TEST_CASE("tilt examples") {
  const auto ws = reference_model("ws-ref");
  const auto same = tilt(ws, 0.0);
  CHECK(same.normalizer == 1.0);
  CHECK(same.model == ws);

  const double theta = std::log(2.0) / 3.0;
  const auto t = tilt(ws, theta);
  const double z = (std::pow(2.0, -2.0 / 3.0) + std::pow(2.0, 1.0 / 3.0)) / 2.0;
  CHECK(t.normalizer == doctest::Approx(z).epsilon(1e-14));
  CHECK(t.normalizer == doctest::Approx(0.944941).epsilon(1e-6));
  CHECK(t.model.weight(0) == doctest::Approx(0.5 * std::exp(-2.0 * theta) / z).epsilon(1e-14));

  const auto law = OffspringLaw::linear_fractional(0.5, 0.5);
  const auto single = tilt(constant_model(law), 0.7);
  CHECK(single.model.weight(0) == 1.0);
  CHECK(single.normalizer == doctest::Approx(std::pow(2.0, 0.7)).epsilon(1e-14));
}

TEST_CASE("tilt rejects a zero mean with positive exponent") {
  const auto model = EnvironmentModel({{OffspringLaw::finite_support({1.0}), 0.5},
                                       {OffspringLaw::linear_fractional(0.5, 0.5), 0.5}});
  CHECK_THROWS_AS(tilt(model, 0.5), ValidationError);
  CHECK_NOTHROW(tilt(model, 0.0));
}

TEST_CASE("env_expectation examples") {
  const auto is = reference_model("is-ref");
  CHECK(env_expectation(is, [](const OffspringLaw& f) { return f.mean(); }) == doctest::Approx(0.6).epsilon(1e-15));
  CHECK(env_expectation(is, [](const OffspringLaw&) { return 1.0; }) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(std::abs(env_expectation(is, [](const OffspringLaw& f) { return f.mean() * std::log(f.mean()); })) <= 1e-15);
}

TEST_CASE("tilts compose and the normalizer is E(m^theta)") {
  for (const auto& name : reference_model_names()) {
    const auto model = reference_model(name);
    const auto a = tilt(tilt(model, 0.3).model, 0.45).model;
    const auto b = tilt(model, 0.75).model;
    for (std::size_t i = 0; i < model.size(); ++i) CHECK(std::abs(a.weight(i) - b.weight(i)) <= 1e-12);
    const double e = env_expectation(model, [](const OffspringLaw& f) { return std::pow(f.mean(), 0.6); });
    CHECK(std::abs(tilt(model, 0.6).normalizer - e) <= 1e-12);
  }
}

TEST_CASE("model validation names the field") {
  const auto law = OffspringLaw::linear_fractional(0.25, 0.5);
  try {
    EnvironmentModel({{law, 0.5}, {law, -0.1}});
    FAIL("expected a validation error");
  } catch (const ValidationError& e) {
    CHECK(e.field() == "components[1].weight");
  }
  CHECK_THROWS_AS(EnvironmentModel({{law, 0.5}, {law, 0.4}}), ValidationError);
  CHECK_THROWS_AS(EnvironmentModel({}), ValidationError);
}

TEST_CASE("reference models have the documented means") {
  auto check = [](const std::string& name, double m0, double m1, double w0) {
    const auto model = reference_model(name);
    REQUIRE(model.size() == 2);
    CHECK(model.law(0).mean() == doctest::Approx(m0).epsilon(1e-14));
    CHECK(model.law(1).mean() == doctest::Approx(m1).epsilon(1e-14));
    CHECK(model.weight(0) == doctest::Approx(w0));
    for (std::size_t i = 0; i < 2; ++i) {
      CHECK(model.law(i).is_linear_fractional());
      CHECK(model.law(i).f2() == doctest::Approx(kDefaultF2Ratio * model.law(i).mean()).epsilon(1e-12));
    }
  };
  check("ss-ref", 0.5, 0.25, 0.5);
  check("is-ref", 2.0, 0.25, 0.2);
  check("ws-ref", std::exp(-2.0), std::exp(1.0), 0.5);
  CHECK_THROWS_AS(reference_model("nope"), ValidationError);
  const auto flat = reference_model("ss-ref", 1.0);
  CHECK(flat.law(0).f2() == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("tilted sampler weights telescope back to the base model") {
  // sum over sequences of P_tilted(seq) * Z^n e^{-theta S_n} g(seq) = sum P(seq) g(seq)
  const auto ws = reference_model("ws-ref");
  const double theta = 0.4;
  const auto t = tilt(ws, theta);
  const std::size_t n = 8;
  const std::vector<double> base_w = {ws.weight(0), ws.weight(1)};
  const std::vector<double> tilt_w = {t.model.weight(0), t.model.weight(1)};
  auto g = [&](const std::vector<std::size_t>& seq) {
    double s = 0.0, v = 0.0;
    for (auto i : seq) {
      s += ws.law(i).log_mean();
      v += std::exp(s);
    }
    return v;
  };
  double base = 0.0, reweighted = 0.0;
  oracle::for_each_sequence(base_w, n, [&](const std::vector<std::size_t>& seq, double p) { base += p * g(seq); });
  oracle::for_each_sequence(tilt_w, n, [&](const std::vector<std::size_t>& seq, double p) {
    double s = 0.0;
    for (auto i : seq) s += ws.law(i).log_mean();
    reweighted += p * std::pow(t.normalizer, double(n)) * std::exp(-theta * s) * g(seq);
  });
  CHECK(std::abs(base - reweighted) <= 1e-12 * std::abs(base));

  // EnvSampler reports the same log weight
  const EnvSampler sampler(ws, theta);
  Stream rng(3);
  std::vector<std::uint32_t> idx;
  const double log_w = sampler.draw(n, rng, idx);
  double s = 0.0;
  for (auto i : idx) s += ws.law(i).log_mean();
  CHECK(log_w == doctest::Approx(n * std::log(t.normalizer) - theta * s).epsilon(1e-12));
}

TEST_CASE("environment enumeration covers every sequence once") {
  const auto ss = reference_model("ss-ref");
  double total = 0.0;
  std::uint64_t count = 0;
  for_each_env_sequence(ss, 6, [&](std::span<const std::uint32_t> idx, double p) {
    CHECK(idx.size() == 6);
    total += p;
    ++count;
  });
  CHECK(count == 64);
  CHECK(total == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(env_sequence_count(ss, 6) == 64);
  CHECK_THROWS_AS(for_each_env_sequence(ss, 30, [](std::span<const std::uint32_t>, double) {}, 1024), ValidationError);
}
