#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace nfol {

// One property suite outcome. checks counts individual comparisons, failures
// the ones that missed their bound; notes carry observed extremes so runs
// can be eyeballed without rerunning.
struct SuiteResult {
  std::string name;
  int checks = 0;
  int failures = 0;
  std::vector<std::string> notes;

  bool ok() const { return failures == 0; }
};

// Golden-oracle answers equal the crisp gold on a generated dataset.
SuiteResult selftest_crisp_soundness(int scenes, int qps, uint64_t seed);

// Exact-mode engine values equal the scalar reference recursion on random
// soft oracles, question by question (binary terminals and open candidates).
SuiteResult selftest_engine_reference(int min_evals, uint64_t seed);

// Single-variable programs match the exact Bernoulli expectation.
SuiteResult selftest_single_variable(int min_evals, uint64_t seed);

// Central finite differences vs tape gradients for each operator kind and
// for the calibration function, both execution modes where they differ.
SuiteResult selftest_gradcheck_ops(uint64_t seed);

// Finite differences through whole compiled programs w.r.t. every atom
// probability the program reads.
SuiteResult selftest_gradcheck_end_to_end(int programs, uint64_t seed);

// Identity curve, exact endpoints, strict monotonicity in alpha and in c.
// param_grid is the per-parameter grid size (the full grid is param_grid^4).
SuiteResult selftest_calibration_shape(int param_grid, int alpha_grid);

// Thresholded crisp execution of each operator row against an independently
// hand-built first-order reading of that row.
SuiteResult selftest_coherence(int scenes_per_row, uint64_t seed);

// Two generations with one seed produce identical scenes and questions.
SuiteResult selftest_generator_determinism(uint64_t seed);

// The default battery the `selftest` command runs.
std::vector<SuiteResult> run_selftest_suites();

}  // namespace nfol
