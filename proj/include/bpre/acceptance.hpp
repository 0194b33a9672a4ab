#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "bpre/offspring.hpp"

namespace bpre {

struct CriterionResult {
  int id = 0;
  std::string name;
  bool passed = false;
  bool report_only = false;  // experiments in the full suite that assert nothing
  std::string detail;
  double seconds = 0.0;
};

using ClosedFormFn = std::function<double(std::span<const OffspringLaw>)>;  // returns log(1 - F_n(0))

struct AcceptanceOptions {
  std::uint64_t seed = 20240611;
  // Closed-form survival used by criterion 1; swapped out by mutation tests.
  ClosedFormFn closed_form;
};

inline constexpr int kCriterionCount = 13;

// Runs one numbered criterion (1..13).
CriterionResult run_criterion(int id, const AcceptanceOptions& opts = {});

// suite: "fast" (criteria 1..13) or "full" (fast plus extra experiments).
// on_result is called as each result becomes available.
std::vector<CriterionResult> run_acceptance(const std::string& suite, const AcceptanceOptions& opts = {},
                                            const std::function<void(const CriterionResult&)>& on_result = {});

std::string format_result(const CriterionResult& r);

}  // namespace bpre
