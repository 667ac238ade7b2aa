#pragma once

#include <string>
#include <vector>

namespace amort {

struct CheckResult {
  std::string module;
  std::string name;
  double worst_err = 0.0;
  double threshold = 0.0;
  bool pass = false;
  std::string note;
};

// Runs the finite-difference and consistency invariants. `scope` is "all" or
// a module name; `inject_fault` names a check whose analytic quantity gets
// one component negated, to prove the harness catches corrupted gradients.
std::vector<CheckResult> run_gradchecks(const std::string& scope,
                                        const std::string& inject_fault = "");

// Pretty table; returns the number of failures.
int print_check_table(const std::vector<CheckResult>& results);

}  // namespace amort
