// Acceptance runner: one PASS/FAIL line per criterion.
#include <cstdlib>
#include <iostream>
#include <string>

#include "bpre/acceptance.hpp"

int main(int argc, char** argv) {
  std::string suite = "fast";
  std::vector<int> only;
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == "fast" || a == "full")
      suite = a;
    else
      only.push_back(std::atoi(a.c_str()));
  }
  bool ok = true;
  auto show = [&](const bpre::CriterionResult& r) {
    std::cout << bpre::format_result(r) << std::endl;
    if (!r.report_only && !r.passed) ok = false;
  };
  if (only.empty()) {
    const auto results = bpre::run_acceptance(suite, {}, show);
    int passed = 0, total = 0;
    for (const auto& r : results)
      if (!r.report_only) {
        ++total;
        passed += r.passed ? 1 : 0;
      }
    std::cout << "summary: " << passed << "/" << total << " criteria passed (" << suite << ")" << std::endl;
  } else {
    for (int id : only) show(bpre::run_criterion(id));
  }
  return ok ? 0 : 1;
}
