#include <cmath>

#include "bpre/environment.hpp"
#include "bpre/errors.hpp"
#include "bpre/regime.hpp"
#include "doctest.h"

using namespace bpre;

namespace {

double phi(const EnvironmentModel& m, double theta) { return moment_generating(m, theta); }

}  // namespace

TEST_CASE("classify the reference models") {
  const auto ss = classify(reference_model("ss-ref"));
  CHECK(ss.regime == Regime::strongly_subcritical);
  CHECK(ss.e_m_log_m == doctest::Approx(-std::log(2.0) / 2.0).epsilon(1e-14));
  CHECK(ss.gamma == doctest::Approx(0.375).epsilon(1e-15));
  CHECK(ss.alpha == 1.0);

  const auto is = classify(reference_model("is-ref"));
  CHECK(is.regime == Regime::intermediate_subcritical);
  CHECK(std::abs(is.e_m_log_m) <= 1e-12);
  CHECK(is.e_log_m == doctest::Approx(-1.4 * std::log(2.0)).epsilon(1e-14));
  CHECK(std::abs(is.gamma - 0.6) <= 1e-15);
  CHECK(is.alpha == 1.0);

  const auto ws = classify(reference_model("ws-ref"));
  CHECK(ws.regime == Regime::weakly_subcritical);
  CHECK(std::abs(ws.alpha - std::log(2.0) / 3.0) <= 1e-8);
  CHECK(std::abs(ws.gamma - (std::pow(2.0, -2.0 / 3.0) + std::pow(2.0, 1.0 / 3.0)) / 2.0) <= 1e-8);
  CHECK(ws.gamma < ws.e_m);
}

TEST_CASE("solve_alpha examples") {
  const auto single = constant_model(OffspringLaw::finite_support({0.5, 0.5}));
  const auto ag = solve_alpha(single);
  CHECK(ag.alpha == 1.0);
  CHECK(ag.gamma == doctest::Approx(0.5).epsilon(1e-15));
  const auto ss = solve_alpha(reference_model("ss-ref"));
  CHECK(ss.alpha == 1.0);
  CHECK(ss.gamma == doctest::Approx(0.375).epsilon(1e-15));
}

TEST_CASE("non-subcritical models are rejected with E log m") {
  const auto crit = constant_model(OffspringLaw::linear_fractional(0.25, 0.5));
  try {
    classify(crit);
    FAIL("expected rejection");
  } catch (const NotSubcriticalError& e) {
    CHECK(e.e_log_m() == doctest::Approx(0.0));
  }
  const auto super = constant_model(OffspringLaw::linear_fractional(0.5, 0.5));
  CHECK_THROWS_AS(classify(super), NotSubcriticalError);
}

TEST_CASE("gamma tilde examples") {
  const auto ws = solve_gamma_tilde(reference_model("ws-ref"), 1);
  CHECK(ws.joint_case == JointSurvivalCase::interior);
  CHECK(std::abs(ws.alpha_tilde - std::log(2.0) / 3.0) <= 1e-8);
  CHECK(ws.gamma_tilde == doctest::Approx(0.944941).epsilon(1e-6));

  const auto ss1 = solve_gamma_tilde(reference_model("ss-ref"), 1);
  CHECK(ss1.joint_case == JointSurvivalCase::decaying);
  CHECK(ss1.gamma_tilde == doctest::Approx(0.375).epsilon(1e-15));
  for (unsigned k = 1; k <= 6; ++k) {
    const auto r = solve_gamma_tilde(reference_model("ss-ref"), k);
    CHECK(r.joint_case == JointSurvivalCase::decaying);
    CHECK(r.gamma_tilde == doctest::Approx((std::pow(2.0, -double(k)) + std::pow(4.0, -double(k))) / 2.0).epsilon(1e-14));
  }

  const auto is2 = solve_gamma_tilde(reference_model("is-ref"), 2);
  CHECK(is2.joint_case == JointSurvivalCase::interior);
  CHECK(is2.alpha_tilde > 0.0);
  CHECK(is2.alpha_tilde < 2.0);
  const auto is1 = solve_gamma_tilde(reference_model("is-ref"), 1);
  CHECK(is1.joint_case == JointSurvivalCase::boundary);
}

TEST_CASE("interior solutions are stationary local minima") {
  for (const auto& name : {"ws-ref", "is-ref"}) {
    const auto model = reference_model(name);
    const auto r = classify(model);
    if (r.regime == Regime::weakly_subcritical) CHECK(std::abs(moment_generating_slope(model, r.alpha)) <= 1e-10);
    CHECK(phi(model, std::min(1.0, r.alpha + 1e-6)) >= phi(model, r.alpha) - 1e-15);
    CHECK(phi(model, r.alpha - 1e-6) >= phi(model, r.alpha) - 1e-15);
  }
  const auto gt = solve_gamma_tilde(reference_model("is-ref"), 3);
  CHECK(std::abs(moment_generating_slope(reference_model("is-ref"), gt.alpha_tilde)) <= 1e-10);
}

TEST_CASE("a zero-mean component makes E log m infinite") {
  const auto model = EnvironmentModel({{OffspringLaw::finite_support({1.0}), 0.5},
                                       {OffspringLaw::linear_fractional(0.25, 0.5), 0.5}});
  const auto r = classify(model);
  CHECK(std::isinf(r.e_log_m));
  CHECK(r.e_log_m < 0.0);
  CHECK(r.gamma == doctest::Approx(0.5).epsilon(1e-15));
}

TEST_CASE("gamma <= E m with equality exactly in SS and IS") {
  for (const auto& name : reference_model_names()) {
    const auto r = classify(reference_model(name));
    CHECK(r.gamma <= r.e_m + 1e-15);
    if (r.regime == Regime::weakly_subcritical)
      CHECK(r.gamma < r.e_m - 1e-6);
    else
      CHECK(std::abs(r.gamma - r.e_m) <= 1e-15);
  }
}

TEST_CASE("the alpha tilt centers the walk in the interior case") {
  const auto ws = reference_model("ws-ref");
  const auto r = classify(ws);
  const auto t = tilt(ws, r.alpha);
  CHECK(std::abs(env_expectation(t.model, [](const OffspringLaw& f) { return f.log_mean(); })) <= 1e-10);
  CHECK(t.normalizer == doctest::Approx(r.gamma).epsilon(1e-14));
}

TEST_CASE("a designed tie is classified as intermediate") {
  // 0.2 * 2 log 2 + 0.8 * (1/4) log(1/4) = 0 up to rounding
  const auto model = EnvironmentModel({{OffspringLaw::linear_fractional_from_moments(2.0, 8.0), 0.2},
                                       {OffspringLaw::linear_fractional_from_moments(0.25, 1.0), 0.8}});
  CHECK(classify(model).regime == Regime::intermediate_subcritical);
  CHECK(to_string(Regime::weakly_subcritical) == "WS");
  CHECK(to_string(JointSurvivalCase::boundary) == "ii");
}
