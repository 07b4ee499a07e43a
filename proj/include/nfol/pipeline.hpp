#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "nfol/calibration.hpp"
#include "nfol/harness.hpp"
#include "nfol/oracle_model.hpp"

namespace nfol {

// Runs fn(0..n-1) across up to `threads` workers (simple block partition);
// threads <= 1 runs inline. Callers write into index-addressed slots, so
// results do not depend on the worker count.
void parallel_for(int n, int threads, const std::function<void(int)>& fn);

// Worker count from NFOL_THREADS, falling back to the hardware count.
int default_threads();

// Featurizations for every scene in the dataset, derived from per-scene
// stream seeds; index-aligned with dataset.scenes.
std::vector<Featurization> featurize_dataset(const Dataset& d, const CorruptionSpec& spec,
                                             uint64_t seed);

struct AnswerConfig {
  double theta = 0.5;
  CorruptionSpec corruption;
  uint64_t seed = 1;
  int threads = 1;
};

// Answers every question with the golden oracle.
std::vector<AnswerRecord> answer_with_golden(const Dataset& d, double theta, int threads);

// Answers every question with the trained oracle, optionally calibrated.
std::vector<AnswerRecord> answer_with_model(const Dataset& d, const OracleModel& model,
                                            const ContextTable* calibration,
                                            const AnswerConfig& cfg);

struct FitConfig {
  double lr = 0.05;
  int epochs = 8;
  int batch_size = 64;
  uint64_t seed = 1;
  CorruptionSpec corruption;
  double clip_norm = 5.0;
};

struct FitStats {
  std::vector<double> epoch_loss;
  int entries = 0;  // contexts present in the fitted table
};

// Fits per-context calibration parameters against answer cross-entropy with
// the oracle frozen: attentions are computed once per question as constants,
// only calibration parameters live on the tape. The table is initialized at
// identity with one entry per (predicate, position) context in the dataset.
FitStats fit_calibration(ContextTable& table, const OracleModel& model, const Dataset& d,
                         const FitConfig& cfg);

// Scene-level prefix/suffix partition used by the evaluation protocol: the
// first `train_scenes` scenes (file order) with their questions, and the rest.
std::pair<Dataset, Dataset> partition_dataset(const Dataset& d, int train_scenes);

}  // namespace nfol
