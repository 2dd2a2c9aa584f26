#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace seqac::acceptance {

struct CriterionResult {
  std::string id;
  std::string title;
  bool passed = false;
  std::string detail;
};

/// Prints one PASS/FAIL line per criterion as soon as it is decided.
class Reporter {
 public:
  void add(CriterionResult result);
  const std::vector<CriterionResult>& results() const noexcept { return results_; }
  bool all_passed() const;

 private:
  std::vector<CriterionResult> results_;
};

/// Enumerable toy tasks and gradient checks (criteria 1-4 and the exact half of 8).
void run_exact_suite(Reporter& reporter, std::uint64_t seed);

struct DeskOptions {
  std::filesystem::path corpus;
  std::filesystem::path work;
  std::vector<std::uint64_t> seeds = {1, 2, 3};
  std::size_t joint_steps = 20000;  // the criterion requires at least 20k
  std::size_t ll_max_steps = 0;     // 0 keeps the training default; smoke runs only
};

/// Spelling-correction experiments (criteria 5, 6, 7, the beam half of 8, and 9).
void run_desk_suite(Reporter& reporter, const DeskOptions& options);

}  // namespace seqac::acceptance
