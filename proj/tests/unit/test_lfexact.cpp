#include <cmath>
#include <stdexcept>

#include "bpre/environment.hpp"
#include "bpre/errors.hpp"
#include "bpre/lfexact.hpp"
#include "bpre/simcore.hpp"
#include "doctest.h"
#include "oracles.hpp"

using namespace bpre;

namespace {

const OffspringLaw kGeo = OffspringLaw::linear_fractional(0.25, 0.5);

EnvSequence constant_env(std::size_t n) { return EnvSequence(n, kGeo); }

double running_min(const EnvSequence& env) {
  double s = 0.0, lo = 0.0;
  for (const auto& f : env) {
    s += f.log_mean();
    lo = std::min(lo, s);
  }
  return lo;
}

}  // namespace

TEST_CASE("iterate_F examples") {
  CHECK(iterate_F({}, 0.3) == 0.3);
  CHECK(iterate_F(constant_env(2), 0.0) == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
  const auto ws = reference_model("ws-ref");
  Stream rng(1);
  const auto env = draw_env(ws, 12, rng);
  CHECK(iterate_F(env, 1.0) == 1.0);
  CHECK_THROWS_AS(iterate_F(env, 1.2), std::domain_error);
}

TEST_CASE("quenched survival examples") {
  auto q = quenched_survival(constant_env(4), 1);
  CHECK(q.p == doctest::Approx(0.2).epsilon(1e-14));
  REQUIRE(q.closed_form_p.has_value());
  CHECK(*q.closed_form_p == doctest::Approx(0.2).epsilon(1e-14));
  q = quenched_survival({}, 1);
  CHECK(q.p == 1.0);
  CHECK(q.log_p == 0.0);
  q = quenched_survival(constant_env(2), 2);
  CHECK(q.all_survive == doctest::Approx(1.0 / 9.0).epsilon(1e-14));
  CHECK(q.at_least_one == doctest::Approx(5.0 / 9.0).epsilon(1e-14));
}

TEST_CASE("survival agrees with plain pgf composition on mixed environments") {
  const EnvSequence env = {OffspringLaw::linear_fractional(0.3, 0.4), OffspringLaw::finite_support({0.2, 0.5, 0.3}),
                           OffspringLaw::linear_fractional(0.1, 0.6), OffspringLaw::finite_support({0.6, 0.1, 0.3})};
  std::vector<std::function<double(double)>> pgfs = {
      [](double s) { return oracle::lf_pgf(0.3, 0.4, s); }, [](double s) { return 0.2 + 0.5 * s + 0.3 * s * s; },
      [](double s) { return oracle::lf_pgf(0.1, 0.6, s); }, [](double s) { return 0.6 + 0.1 * s + 0.3 * s * s; }};
  const auto q = quenched_survival(env, 1);
  CHECK(q.p == doctest::Approx(oracle::survival(pgfs)).epsilon(1e-13));
  CHECK_FALSE(q.closed_form_p.has_value());
}

TEST_CASE("closed form against iteration up to n = 1000") {
  for (std::size_t n = 1; n <= 1000; ++n) {
    const auto env = constant_env(n);
    const double it = std::exp(log_survival(env));
    const double cf = std::exp(lf_closed_form_log_survival(env));
    CHECK(std::abs(it - 1.0 / (1.0 + n)) <= 1e-10);
    CHECK(std::abs(cf - 1.0 / (1.0 + n)) <= 1e-10);
  }
}

TEST_CASE("long horizons stay finite in log space") {
  const auto ws = reference_model("ws-ref");
  Stream rng(5);
  const auto env = draw_env(ws, 5000, rng);
  const double a = log_survival(env);
  const double b = lf_closed_form_log_survival(env);
  CHECK(std::isfinite(a));
  CHECK(a < -50.0);
  CHECK(std::abs(a - b) <= 1e-8 * std::abs(a));
}

TEST_CASE("survival is bounded by the walk minimum and decreases with the horizon") {
  for (const auto& name : reference_model_names()) {
    const auto model = reference_model(name);
    for (std::uint64_t rep = 0; rep < 2000; ++rep) {
      Stream rng(9, rep);
      const auto env = draw_env(model, 30, rng);
      // q_i is the survival probability from generation i to the horizon
      const auto profile = survival_profile(env);
      for (std::size_t i = 0; i < env.size(); ++i) {
        CHECK(profile[i] >= 0.0);
        CHECK(profile[i] <= std::min(1.0, env[i].mean() * profile[i + 1]) * (1.0 + 1e-12));
      }
      double prev = 0.0;
      for (std::size_t n = 1; n <= env.size(); ++n) {
        const double lp = log_survival(std::span(env).first(n));
        CHECK(lp <= prev + 1e-12);
        prev = lp;
      }
      CHECK(std::exp(log_survival(env)) <= std::exp(running_min(env)) + 1e-12);
    }
  }
}

TEST_CASE("lf_minorant examples") {
  const auto bern = lf_minorant(OffspringLaw::finite_support({0.5, 0.5}));
  REQUIRE(bern.is_linear_fractional());
  CHECK(bern.lf().A == doctest::Approx(0.5));
  CHECK(bern.lf().B == 0.0);
  for (double s : {0.0, 0.3, 1.0}) CHECK(bern.pgf(s) == doctest::Approx((1.0 + s) / 2.0).epsilon(1e-15));

  // m = 1, f2 = 1
  const auto law = OffspringLaw::finite_support({0.5, 0.0, 0.5});
  const auto mm = lf_minorant(law);
  CHECK(mm.lf().A == doctest::Approx(0.25).epsilon(1e-15));
  CHECK(mm.lf().B == doctest::Approx(0.5).epsilon(1e-15));

  const auto lf = OffspringLaw::linear_fractional(0.25, 0.5);
  const auto m2 = lf_minorant(lf);
  CHECK(m2.mean() == doctest::Approx(lf.mean()).epsilon(1e-14));
  CHECK(m2.f2() == doctest::Approx(2.0 * lf.f2()).epsilon(1e-14));
  CHECK_FALSE(m2 == lf);
  CHECK_THROWS_AS(lf_minorant(OffspringLaw::finite_support({1.0})), ValidationError);
}

TEST_CASE("minorant never increases survival") {
  for (const auto& name : reference_model_names()) {
    const auto model = reference_model(name);
    for (std::uint64_t rep = 0; rep < 500; ++rep) {
      Stream rng(21, rep);
      const auto env = draw_env(model, 20, rng);
      EnvSequence minor;
      for (const auto& f : env) minor.push_back(lf_minorant(f));
      CHECK(log_survival(minor) <= log_survival(env) + 1e-12);
    }
  }
}

TEST_CASE("lineage simulation reproduces the quenched survival probability") {
  // constant environment: p = 1 / (1 + n)
  const auto model = constant_model(kGeo);
  const std::size_t n = 5;
  const int reps = 100'000;
  int alive = 0;
  for (int r = 0; r < reps; ++r) {
    Stream rng(31, r);
    alive += simulate_lineages(model, 1, n, rng).alive;
  }
  const double p = 1.0 / 6.0;
  CHECK(std::abs(alive / double(reps) - p) <= 4.0 * std::sqrt(p * (1 - p) / reps));
}
