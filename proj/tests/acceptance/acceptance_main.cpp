// Acceptance gate: one PASS/FAIL line per criterion, exit status 1 if any fails.
#include <cstdio>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "criteria.hpp"

namespace seqac::acceptance {

void Reporter::add(CriterionResult result) {
  std::cout << (result.passed ? "PASS" : "FAIL") << "  [" << result.id << "] " << result.title
            << ": " << result.detail << std::endl;
  results_.push_back(std::move(result));
}

bool Reporter::all_passed() const {
  for (const auto& r : results_) {
    if (!r.passed) return false;
  }
  return !results_.empty();
}

}  // namespace seqac::acceptance

int main(int argc, char** argv) {
  using namespace seqac::acceptance;
  CLI::App app{"seqac acceptance criteria"};
  std::string suite = "exact";
  std::uint64_t seed = 2016;
  DeskOptions desk;
  std::string seeds = "1,2,3";
  app.add_option("--suite", suite, "exact, desk or all")->check(CLI::IsMember({"exact", "desk", "all"}));
  app.add_option("--seed", seed, "Seed for the exact suite");
  app.add_option("--corpus", desk.corpus, "Text corpus for the desk suite");
  app.add_option("--work", desk.work, "Directory for desk-suite runs");
  app.add_option("--seeds", seeds, "Comma-separated desk seeds");
  app.add_option("--joint-steps", desk.joint_steps, "Joint training steps per desk run");
  app.add_option("--ll-max-steps", desk.ll_max_steps, "Cap on log-likelihood steps (smoke runs)");
  CLI11_PARSE(app, argc, argv);

  desk.seeds.clear();
  std::istringstream in(seeds);
  for (std::string s; std::getline(in, s, ',');) desk.seeds.push_back(std::stoull(s));

  Reporter reporter;
  try {
    if (suite == "exact" || suite == "all") run_exact_suite(reporter, seed);
    if (suite == "desk" || suite == "all") {
      if (desk.corpus.empty() || desk.work.empty()) {
        std::cerr << "the desk suite needs --corpus and --work\n";
        return 2;
      }
      run_desk_suite(reporter, desk);
    }
  } catch (const std::exception& e) {
    std::cout << "FAIL  [error] suite aborted: " << e.what() << std::endl;
    return 1;
  }
  std::size_t failed = 0;
  for (const auto& r : reporter.results()) failed += r.passed ? 0 : 1;
  std::cout << reporter.results().size() - failed << "/" << reporter.results().size()
            << " criteria passed" << std::endl;
  return reporter.all_passed() ? 0 : 1;
}
