#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace isotower {

struct CriterionResult {
  int id = 0;
  std::string name;
  bool passed = false;
  std::string detail;
  double seconds = 0.0;
};

struct AcceptanceOptions {
  bool quick = false;                  // skip the long-running criteria
  std::vector<int> only;               // explicit selection; overrides quick
  std::optional<double> secular_tol;   // override for every secular solve
  int threads = 1;
};

inline constexpr int kCriterionCount = 11;

std::vector<int> quick_criteria();
std::string criterion_name(int id);

CriterionResult run_criterion(int id, const AcceptanceOptions& opt);

std::vector<CriterionResult> run_acceptance(const AcceptanceOptions& opt,
                                            const std::function<void(const CriterionResult&)>& on_result = {});

// One line: PASS/FAIL, id, name, detail, wall time.
std::string format_result(const CriterionResult& r);

}  // namespace isotower
