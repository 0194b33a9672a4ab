#include <algorithm>
#include <cmath>

#include "bpre/errors.hpp"
#include "bpre/rwalk.hpp"
#include "doctest.h"
#include "oracles.hpp"

using namespace bpre;

namespace {

EstimatorConfig config(std::uint64_t seed, std::uint64_t reps, std::optional<Method> method = std::nullopt) {
  EstimatorConfig cfg;
  cfg.seed = seed;
  cfg.reps = reps;
  cfg.method = method;
  return cfg;
}

// Enumerates every step sequence; fn(prob, partial sums S_0..S_n).
template <class Fn>
void for_each_path(const StepLaw& law, std::size_t n, Fn&& fn) {
  oracle::for_each_sequence(law.weights, n, [&](const std::vector<std::size_t>& idx, double prob) {
    std::vector<double> s(n + 1, 0.0);
    for (std::size_t i = 0; i < n; ++i) s[i + 1] = s[i] + law.values[idx[i]];
    fn(prob, s);
  });
}

double min_of(const std::vector<double>& s) { return *std::min_element(s.begin(), s.end()); }

double enumerate_tail(const StepLaw& law, std::size_t n, double x) {
  double total = 0.0;
  for_each_path(law, n, [&](double prob, const std::vector<double>& s) {
    if (min_of(s) >= -x - 1e-12) total += prob;
  });
  return total;
}

}  // namespace

TEST_CASE("walk_stats examples") {
  const std::vector<double> a = {-1.0, 1.0, -1.0};
  auto st = walk_stats(make_walk(a));
  CHECK(st.min_from_zero == -1.0);
  REQUIRE(st.min_from_one.has_value());
  CHECK(*st.min_from_one == -1.0);
  CHECK(st.occupation.at(0) == 2);
  CHECK(st.occupation.at(1) == 2);
  CHECK(st.reflected_sum == doctest::Approx(2.0 + 2.0 * std::exp(-1.0)).epsilon(1e-15));
  CHECK(st.reflected_sum == doctest::Approx(2.735759).epsilon(1e-6));

  st = walk_stats(make_walk(std::vector<double>{}));
  CHECK(st.min_from_zero == 0.0);
  CHECK_FALSE(st.min_from_one.has_value());
  CHECK(st.reflected_sum == 1.0);

  const std::vector<double> down = {-1.0, -1.0, -1.0};
  st = walk_stats(make_walk(down));
  CHECK(st.min_from_zero == -3.0);
  for (std::int64_t k = 0; k <= 3; ++k) CHECK(st.occupation.at(k) == 1);
  CHECK(st.reflected_sum ==
        doctest::Approx(1.0 + std::exp(-1.0) + std::exp(-2.0) + std::exp(-3.0)).epsilon(1e-15));

  // S = (0, 1): min over 1..n differs from min over 0..n
  st = walk_stats(make_walk(std::vector<double>{1.0}));
  CHECK(st.min_from_zero == 0.0);
  CHECK(*st.min_from_one == 1.0);
}

TEST_CASE("walk_stats invariants on random paths") {
  const auto law = step_law(reference_model("ws-ref"));
  for (std::uint64_t rep = 0; rep < 1000; ++rep) {
    Stream rng(1, rep);
    std::vector<double> steps;
    for (int i = 0; i < 25; ++i) steps.push_back(rng.uniform() < 0.5 ? law.values[0] : law.values[1]);
    const auto st = walk_stats(make_walk(steps));
    std::uint64_t total = 0;
    for (const auto& [k, c] : st.occupation) {
      CHECK(k >= 0);
      total += c;
    }
    CHECK(total == 26);
    CHECK(st.reflected_sum >= 1.0);
    CHECK(st.min_from_zero <= 0.0);
  }
}

TEST_CASE("step law of the reference models") {
  const auto ws = step_law(reference_model("ws-ref"));
  CHECK(ws.values[0] == doctest::Approx(-2.0).epsilon(1e-14));
  CHECK(ws.values[1] == doctest::Approx(1.0).epsilon(1e-14));
  const auto lat = detect_lattice(ws);
  CHECK(lat.span == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(lat.multiples == std::vector<std::int64_t>{-2, 1});
  CHECK(step_alpha(ws).alpha == doctest::Approx(std::log(2.0) / 3.0).epsilon(1e-8));
  CHECK_THROWS_AS(make_step_law({1.0, -1.0}, {0.5, 0.4}), ValidationError);
}

TEST_CASE("ln_tail examples") {
  const auto two = make_step_law({1.0, -1.0}, {1.0 / 3.0, 2.0 / 3.0});
  CHECK(ln_tail_exact(two, 2, 0.0) == doctest::Approx(1.0 / 3.0).epsilon(1e-14));
  CHECK(enumerate_tail(two, 2, 0.0) == doctest::Approx(1.0 / 3.0).epsilon(1e-14));
  CHECK(ln_tail_exact(two, 0, 3.0) == 1.0);
  CHECK(ln_tail(two, 0, 0.7, config(1, 100)).value == 1.0);
  const auto mc = ln_tail(two, 2, 0.0, config(2, 100'000, Method::direct_sim));
  CHECK(std::abs(mc.value - 1.0 / 3.0) <= 4.0 * mc.std_error);
}

TEST_CASE("exact tail on the WS lattice matches path enumeration") {
  const auto ws = step_law(reference_model("ws-ref"));
  for (std::size_t n : {6u, 10u, 14u})
    for (double x : {0.0, 1.0, 2.0, 3.0}) CHECK(ln_tail_exact(ws, n, x) == doctest::Approx(enumerate_tail(ws, n, x)).epsilon(1e-12));
  // off-lattice barrier is floored
  CHECK(ln_tail_exact(ws, 6, 2.5) == doctest::Approx(ln_tail_exact(ws, 6, 2.0)).epsilon(1e-15));
}

TEST_CASE("exact tail rejections") {
  const auto bad = make_step_law({1.0, -std::sqrt(2.0)}, {0.5, 0.5});
  try {
    ln_tail_exact(bad, 4, 0.0);
    FAIL("expected rejection");
  } catch (const ValidationError& e) {
    CHECK(e.field().find("components[") == 0);
  }
  const auto ws = step_law(reference_model("ws-ref"));
  CHECK_THROWS_AS(ln_tail_exact(ws, 65, 1.0), ValidationError);
  CHECK_THROWS_AS(ln_tail(ws, 5, -1.0, config(1, 10)), ValidationError);
}

TEST_CASE("Monte Carlo tail agrees with the exact DP") {
  const auto ws = step_law(reference_model("ws-ref"));
  for (std::size_t n : {10u, 20u})
    for (double x : {0.0, 1.0, 3.0}) {
      const double exact = ln_tail_exact(ws, n, x);
      for (Method m : {Method::direct_sim, Method::tilted_is}) {
        const auto e = ln_tail(ws, n, x, config(3, 100'000, m));
        CHECK(std::abs(e.value - exact) <= 4.0 * e.std_error);
      }
    }
}

TEST_CASE("tilted-IS needs a centered tilt") {
  const auto ss = step_law(reference_model("ss-ref"));
  CHECK_THROWS_AS(ln_tail(ss, 10, 1.0, config(1, 10, Method::tilted_is)), ValidationError);
  CHECK_NOTHROW(ln_tail(ss, 10, 1.0, config(1, 10, Method::direct_sim)));
  const auto is = step_law(reference_model("is-ref"));
  CHECK_NOTHROW(ln_tail(is, 10, 1.0, config(1, 10, Method::tilted_is)));
}

TEST_CASE("occupation tail examples and enumeration") {
  const auto ws = step_law(reference_model("ws-ref"));
  const std::size_t n = 12;
  CHECK(occupation_tail(ws, n, 0, 0, 1.0, config(4, 2000)).value == doctest::Approx(1.0));
  CHECK(occupation_tail(ws, n, 0, n + 2, 1.0, config(4, 2000)).value == 0.0);
  CHECK_THROWS_AS(occupation_tail(ws, n, -1, 1, 1.0, config(4, 10)), ValidationError);

  const std::vector<std::uint64_t> ls = {1, 2, 3, 4};
  for (std::int64_t level : {0, 1}) {
    std::vector<double> num(ls.size(), 0.0);
    double den = 0.0;
    for_each_path(ws, n, [&](double prob, const std::vector<double>& s) {
      const double lo = min_of(s);
      if (lo < -1.0 - 1e-12) return;
      den += prob;
      std::uint64_t count = 0;
      for (double v : s) count += std::floor(v - lo + 1e-9) == double(level);
      for (std::size_t j = 0; j < ls.size(); ++j)
        if (count >= ls[j]) num[j] += prob;
    });
    const auto curve = occupation_curve(ws, n, level, ls, 1.0, config(5, 50'000));
    for (std::size_t j = 0; j < ls.size(); ++j)
      CHECK(std::abs(curve.value[j] - num[j] / den) <= 4.0 * curve.std_error[j] + 1e-12);
  }
}

TEST_CASE("reflected sums") {
  const auto down = make_step_law({-1.0}, {1.0});
  const auto r = reflected_sum_curve(down, {0, 5}, {5.0}, {1.0, 2.0}, config(6, 100, Method::direct_sim));
  REQUIRE(r.cells.size() == 2);
  CHECK(r.cells[0].probability[0] == 1.0);  // n = 0: R = 1
  CHECK(r.cells[1].probability[0] == 0.0);
  CHECK(r.cells[1].probability[1] == 1.0);  // R < e/(e-1) < 2
  REQUIRE(r.beta_hat.has_value());
  CHECK(*r.beta_hat == 2.0);

  const auto ws = step_law(reference_model("ws-ref"));
  const auto check = reflected_sum_check(ws, {20}, {1.0}, config(7, 20'000));
  CHECK(check.beta_hat.has_value());
  CHECK_THROWS_AS(reflected_sum_check(step_law(reference_model("ss-ref")), {5}, {0.0}, config(7, 10)),
                  ValidationError);
  CHECK_THROWS_AS(reflected_sum_check(step_law(reference_model("is-ref")), {5}, {0.0}, config(7, 10)),
                  ValidationError);
}

TEST_CASE("quenched survival lower bound holds path by path") {
  for (const auto& name : reference_model_names()) {
    const auto model = reference_model(name);
    double ratio = 0.0;
    for (const auto& c : model.components()) ratio = std::max(ratio, c.law.f2() / c.law.mean());
    const double c = 1.0 / (1.0 + ratio);
    for (std::uint64_t rep = 0; rep < 300; ++rep) {
      Stream rng(8, rep);
      std::vector<double> log_means;
      std::vector<std::function<double(double)>> pgfs;
      for (int i = 0; i < 20; ++i) {
        const auto& law = model.law(model.draw_index(rng));
        log_means.push_back(law.log_mean());
        const auto lf = law.lf();
        pgfs.push_back([lf](double s) { return oracle::lf_pgf(lf.A, lf.B, s); });
      }
      CHECK(oracle::survival(pgfs) >= lienrw_lower_bound(log_means, c) * (1.0 - 1e-9));
    }
  }
}
