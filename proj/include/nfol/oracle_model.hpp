#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "nfol/autodiff.hpp"
#include "nfol/featurize.hpp"
#include "nfol/harness.hpp"
#include "nfol/oracle.hpp"
#include "nfol/vocab.hpp"

namespace nfol {

struct OracleConfig {
  int hidden = 128;       // width of every hidden layer
  int hidden_layers = 3;
  int pair_proj = 64;     // per-object projection before pair concatenation
  double dropout = 0.1;   // applied after each hidden activation in training
};

struct NamedParam {
  std::string name;
  Tensor value;
};

// The soft visual oracle: a unary MLP mapping object features to one logit
// per unary concept, and a relation MLP over projected, concatenated object
// pairs with one logit per relation. Both heads end in sigmoids.
class OracleModel {
 public:
  OracleModel(const ConceptVocabulary& vocab, const OracleConfig& cfg, uint64_t init_seed);

  const OracleConfig& config() const { return cfg_; }
  uint64_t vocab_hash() const { return vocab_hash_; }
  int feature_dim() const { return feat_dim_; }
  const std::vector<NamedParam>& params() const { return params_; }
  std::vector<NamedParam>& params() { return params_; }
  std::vector<Tensor*> param_tensors();

  // Hash over the serialized checkpoint; reported as run metadata.
  uint64_t param_hash() const;

  std::string to_json_text() const;
  // Verifies the stored vocabulary hash and all shapes.
  static OracleModel from_json_text(const std::string& text, const ConceptVocabulary& vocab);

 private:
  void init_params(uint64_t seed);

  const ConceptVocabulary* vocab_;
  OracleConfig cfg_;
  uint64_t vocab_hash_ = 0;
  int feat_dim_ = 0;
  int unary_out_ = 0;
  int relation_out_ = 0;
  std::vector<NamedParam> params_;
};

// Per-tape binding of the model parameters, tracked (training) or constant
// (inference; constant folding keeps the tape empty).
struct BoundModel {
  const OracleModel* model = nullptr;
  std::vector<DiffValue> values;  // aligned with model->params()

  static BoundModel bind(Tape& t, const OracleModel& m, bool tracked);
  const DiffValue& operator[](const std::string& name) const;
};

// Optional dropout source for training-time forwards; null disables dropout.
struct DropoutCtx {
  std::mt19937_64* rng = nullptr;
  double rate = 0.0;
};

// Batched forward passes over one scene's features.
// unary:    (n x d) -> (n x |unary|) probabilities.
// relation: (n x d) -> (n*n x |binary|), row i*n+j is the pair (subject i, object j).
DiffValue oracle_unary_forward(Tape& t, const BoundModel& b, const DiffValue& feats,
                               const DropoutCtx& drop);
DiffValue oracle_relation_forward(Tape& t, const BoundModel& b, const DiffValue& feats,
                                  const DropoutCtx& drop);

// VisualOracle adapter over the model for one scene. Computes each head's
// full attention matrix lazily once per evaluation and serves per-concept
// columns off it.
class NeuralOracle : public VisualOracle {
 public:
  NeuralOracle(Tape& tape, const BoundModel& bound, const ConceptVocabulary& vocab,
               const Featurization& feats, DropoutCtx drop = {});

  int object_count() const override { return n_; }
  DiffValue unary_attention(Tape& t, const std::string& token) override;
  DiffValue relation_attention(Tape& t, const std::string& rel) override;

 private:
  void check_tape(const Tape& t) const;

  Tape& tape_;
  const BoundModel& bound_;
  const ConceptVocabulary& vocab_;
  DiffValue feats_;
  DropoutCtx drop_;
  int n_ = 0;
  bool have_unary_ = false;
  bool have_relation_ = false;
  DiffValue unary_matrix_;
  DiffValue relation_matrix_;
};

struct TrainConfig {
  double lr = 1e-4;
  double weight_decay = 1e-10;
  double clip_norm = 0.65;
  int batch_size = 32;
  int epochs = 10;
  // (max program length, epochs) stages consumed in order; epochs beyond the
  // stages run without a length cap.
  std::vector<std::pair<int, int>> curriculum;
  uint64_t seed = 1;
  CorruptionSpec corruption;
  double theta = 0.5;
};

struct EpochStat {
  int epoch = 0;
  int length_cap = 0;  // 0 = uncapped
  int questions = 0;
  double loss = 0.0;
  double accuracy = 0.0;  // evaluation-mode answers vs gold on the epoch's pool
};

struct TrainStats {
  std::vector<EpochStat> epochs;
};

// Answer cross-entropy through the engine: binary questions fit the terminal
// likelihood against {0,1}; open questions fit every candidate likelihood
// against its one-hot gold. Deterministic for a fixed seed.
TrainStats train_oracle(OracleModel& model, const Dataset& data, const TrainConfig& cfg);

std::string loss_curve_csv(const TrainStats& stats);

}  // namespace nfol
