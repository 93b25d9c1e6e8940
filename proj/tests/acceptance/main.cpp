// Acceptance runner: one PASS/FAIL line per criterion with its measurement and
// runtime. Usage:
//   motionkit_acceptance --cli PATH --work DIR [--known-gap N]... [--only N]...
// Criteria listed with --known-gap still print FAIL when they fail, but do not
// change the exit status.

#include <chrono>
#include <cstdio>
#include <functional>
#include <iostream>
#include <set>

#include "CLI11.hpp"
#include "acceptance.hpp"
#include "motionkit/common.hpp"

namespace {

struct Criterion {
  int id;
  const char* name;
  double limit_seconds;
  std::function<acceptance::Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"motionkit acceptance criteria"};
  std::string cli, work;
  std::vector<int> known_gaps, only;
  app.add_option("--cli", cli, "Path to the motionkit executable")->required();
  app.add_option("--work", work, "Scratch directory for the command-line runs")->required();
  app.add_option("--known-gap", known_gaps, "Criterion whose failure is documented and does not fail the run");
  app.add_option("--only", only, "Run only these criteria");
  CLI11_PARSE(app, argc, argv);

  const std::vector<Criterion> criteria{
      {1, "rotation suite", 10, acceptance::rotation_suite},
      {2, "representation losslessness", 30, acceptance::representation_lossless},
      {3, "wavelet perfect reconstruction", 10, acceptance::wavelet_reconstruction},
      {4, "FSQ correctness", 5, acceptance::fsq_correctness},
      {5, "curation recovery", 60, acceptance::curation_recovery},
      {6, "gradient integrity", 120, acceptance::gradient_integrity},
      {7, "hybrid-mask causality", 30, acceptance::mask_causality},
      {8, "loss sanity and memorization", 600, acceptance::loss_sanity},
      {9, "wavelet ablation trend", 1200, acceptance::wavelet_ablation},
      {10, "metrics analytic cases", 10, acceptance::metrics_analytic},
      {11, "end-to-end determinism", 1800, [&] { return acceptance::cli_determinism(cli, work); }},
  };

  const std::set<int> gaps(known_gaps.begin(), known_gaps.end());
  const std::set<int> selected(only.begin(), only.end());
  int passed = 0, failed = 0, gap_failures = 0;
  for (const auto& c : criteria) {
    if (!selected.empty() && !selected.contains(c.id)) continue;
    const auto start = std::chrono::steady_clock::now();
    acceptance::Outcome outcome;
    try {
      outcome = c.run();
    } catch (const std::exception& e) {
      outcome = {false, std::string("exception: ") + e.what()};
    }
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const bool in_time = seconds < c.limit_seconds;
    const bool pass = outcome.pass && in_time;
    std::printf("criterion %2d %s %s: %s [%.1f s of %.0f s]\n", c.id, pass ? "PASS" : "FAIL", c.name,
                outcome.detail.c_str(), seconds, c.limit_seconds);
    if (!pass && gaps.contains(c.id)) std::printf("             known gap: failure documented, not counted\n");
    std::fflush(stdout);
    if (pass) {
      ++passed;
    } else if (gaps.contains(c.id)) {
      ++gap_failures;
    } else {
      ++failed;
    }
  }
  std::printf("%d passed, %d failed, %d known-gap failures\n", passed, failed, gap_failures);
  return failed == 0 ? 0 : 1;
}
