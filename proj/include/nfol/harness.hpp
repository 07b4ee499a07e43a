#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "nfol/dsl.hpp"
#include "nfol/engine.hpp"
#include "nfol/scene.hpp"
#include "nfol/vocab.hpp"

namespace nfol {

struct Question {
  std::string id;
  std::string scene_id;
  std::string gold;
  std::vector<std::string> entails;  // ids of questions this one entails
  std::string program_text;
  DslProgram program;
  DfolProgram compiled;
  std::vector<FormulaPtr> formulas;     // 1 for binary, per candidate for open
  std::vector<std::string> candidates;  // empty for binary
  bool open = false;
  int length = 0;  // program step count
};

struct Dataset {
  ConceptVocabulary vocab;
  std::vector<std::string> scene_ids;  // file order
  std::vector<SceneGraph> scenes;
  std::map<std::string, int> scene_index;
  std::vector<Question> questions;
  std::map<std::string, int> question_index;

  const SceneGraph& scene_of(const Question& q) const;
};

struct GenConfig {
  uint64_t seed = 1;
  int scenes = 100;
  int questions_per_scene = 5;
  int min_objects = 2;
  int max_objects = 8;
};

// Deterministic synthetic scenes and questions. Gold answers come from the
// crisp checker; binary yes/no counts are balanced; open templates emit
// entailed follow-up questions.
Dataset generate(const GenConfig& cfg);

// Scene sampler shared with coherence tests.
SceneGraph random_scene(const ConceptVocabulary& vocab, std::mt19937_64& rng,
                        int min_objects, int max_objects);

// Dataset bundle on disk: vocab.json, scenes.jsonl, questions.jsonl.
void save_dataset(const Dataset& d, const std::string& dir);
Dataset load_dataset(const std::string& dir);

struct AnswerRecord {
  std::string id;
  std::string answer;
  double likelihood = 0.0;
};

std::string answers_to_jsonl(const std::vector<AnswerRecord>& answers);
std::vector<AnswerRecord> answers_from_jsonl(const std::string& text);

// Mean over questions q answered correctly with a non-empty entailment set of
// the fraction of q's entailed questions answered correctly. vacuous = no
// question qualified (value 1.0 by convention).
struct ConsistencyResult {
  double value = 1.0;
  bool vacuous = true;
};
ConsistencyResult consistency(const Dataset& d, const std::map<std::string, std::string>& answer_by_id);

struct SplitReport {
  std::vector<std::string> easy;  // answered correctly by the base model
  std::vector<std::string> hard;
  std::map<std::string, AnswerRecord> base_answers;
  std::map<std::string, std::string> meta;
};

SplitReport make_split(const Dataset& d, const std::vector<AnswerRecord>& base);
std::string split_to_json_text(const SplitReport& s);
SplitReport split_from_json_text(const std::string& text);

// One row of the report: a metric is absent when its denominator is empty.
struct ScoreRow {
  int count = 0;
  std::optional<double> accuracy;
  std::optional<double> consistency;
  bool consistency_vacuous = false;
  std::optional<double> acc_h;  // accuracy on the hard set
  std::optional<double> err_e;  // error on the easy set
  int hard_count = 0;
  int easy_count = 0;
};

struct ScoreReport {
  ScoreRow open;
  ScoreRow binary;
  ScoreRow all;
  std::map<std::string, std::string> meta;
};

// Scores an answer file; hard/easy metrics appear when a split is given.
ScoreReport reasoning_scores(const Dataset& d, const std::vector<AnswerRecord>& answers,
                             const SplitReport* split, std::map<std::string, std::string> meta);
std::string report_to_json_text(const ScoreReport& r);

// Gold-consistent answer check shared by metrics: exact token equality.
bool answer_correct(const Question& q, const std::string& answer);

}  // namespace nfol
