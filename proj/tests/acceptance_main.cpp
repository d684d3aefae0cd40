#include <iostream>

#include "npg/acceptance.hpp"

// One PASS/FAIL line per criterion; exit status is nonzero when any criterion fails.
int main() {
  int failed = 0;
  npg::run_acceptance(1, [&](const npg::AcceptanceResult& r) {
    if (!r.passed) ++failed;
    std::cout << npg::format_result(r) << std::endl;
  });
  std::cout << (npg::kAcceptanceCount - failed) << "/" << npg::kAcceptanceCount << " criteria passed" << std::endl;
  return failed == 0 ? 0 : 1;
}
