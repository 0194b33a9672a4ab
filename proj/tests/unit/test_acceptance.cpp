#include <cmath>

#include "bpre/acceptance.hpp"
#include "bpre/errors.hpp"
#include "doctest.h"

using namespace bpre;

TEST_CASE("criterion 1 passes on the library closed form") {
  const auto r = run_criterion(1);
  CHECK(r.id == 1);
  CHECK(r.passed);
  CHECK_FALSE(r.report_only);
}

TEST_CASE("a corrupted closed form fails criterion 1") {
  AcceptanceOptions opts;
  // drops the factor 1/2 on f''/f' in the denominator
  opts.closed_form = [](std::span<const OffspringLaw> env) {
    double log_prod = 0.0, denom = 1.0;
    for (std::size_t i = 0; i < env.size(); ++i) {
      const auto& law = env[env.size() - 1 - i];
      denom += law.f2() / law.mean() * std::exp(log_prod);
      log_prod += law.log_mean();
    }
    return log_prod - std::log(denom);
  };
  CHECK_FALSE(run_criterion(1, opts).passed);
}

TEST_CASE("unknown suites and criteria are rejected") {
  CHECK_THROWS_AS(run_acceptance("medium"), ValidationError);
  CHECK_THROWS_AS(run_criterion(0), ValidationError);
  CHECK_THROWS_AS(run_criterion(999), ValidationError);
}

TEST_CASE("result formatting") {
  CriterionResult r;
  r.id = 3;
  r.name = "example";
  r.passed = true;
  r.detail = "value 1";
  const auto line = format_result(r);
  CHECK(line.find("PASS") != std::string::npos);
  CHECK(line.find("example") != std::string::npos);
  r.passed = false;
  CHECK(format_result(r).find("FAIL") != std::string::npos);
}
