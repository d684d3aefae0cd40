#pragma once

#include <functional>
#include <string>
#include <vector>

namespace npg {

inline constexpr int kAcceptanceCount = 11;

struct AcceptanceResult {
  int id = 0;
  std::string name;
  bool passed = false;
  std::string detail;
  double seconds = 0.0;
};

// Runs criterion id in [1, kAcceptanceCount]; threads only affects the Markov criteria's per-state work.
AcceptanceResult run_criterion(int id, int threads = 1);

// Runs every criterion in order; on_result fires after each one.
std::vector<AcceptanceResult> run_acceptance(int threads = 1,
                                             const std::function<void(const AcceptanceResult&)>& on_result = {});

// "PASS AC<id> <name>: <detail> [<seconds>s]"
std::string format_result(const AcceptanceResult& r);

}  // namespace npg
