#pragma once

#include <cstdint>
#include <map>
#include <random>
#include <string>

#include "nfol/autodiff.hpp"
#include "nfol/fol.hpp"
#include "nfol/scene.hpp"
#include "nfol/vocab.hpp"

namespace nfol {

// Answers per-object and per-pair concept queries for one scene. The engine
// is agnostic to the implementation: golden lookups, a fixed probability
// table, or a neural model over features all plug in here.
class VisualOracle {
 public:
  virtual ~VisualOracle() = default;
  virtual int object_count() const = 0;
  // alpha(concept | x_i) for every object i; length-n vector in [0,1].
  virtual DiffValue unary_attention(Tape& t, const std::string& token) = 0;
  // alpha(rel | x_i, x_j) as an n x n matrix; rows index the subject.
  virtual DiffValue relation_attention(Tape& t, const std::string& rel) = 0;
};

// Exact 0/1 attention straight from the scene graph.
class GoldenOracle : public VisualOracle {
 public:
  GoldenOracle(const SceneGraph& scene, const ConceptVocabulary& vocab)
      : scene_(scene), vocab_(vocab) {}
  int object_count() const override { return scene_.size(); }
  DiffValue unary_attention(Tape& t, const std::string& token) override;
  DiffValue relation_attention(Tape& t, const std::string& rel) override;

 private:
  const SceneGraph& scene_;
  const ConceptVocabulary& vocab_;
};

// Per-ground-atom probability table. Used as the "random soft oracle" in
// equivalence and gradient tests: the same numbers back the engine, the
// scalar reference recursion, and the expectation evaluator. In tracked mode
// each predicate's tensor becomes a tape leaf so programs can be
// differentiated with respect to individual atom probabilities.
class AtomTableOracle : public VisualOracle {
 public:
  AtomTableOracle(const ConceptVocabulary& vocab, int n_objects);

  // Fills every unary and relation slot with draws from [lo, hi].
  void fill_random(uint64_t seed, double lo = 0.05, double hi = 0.95);
  void fill_crisp(const SceneGraph& scene);

  void set_unary(const std::string& token, int i, double p);
  void set_relation(const std::string& rel, int i, int j, double p);
  double unary(const std::string& token, int i) const;
  double relation(const std::string& rel, int i, int j) const;

  // (pred, i, j<0 for unary) -> probability; plugs into product_semantics_eval
  // and atom_expectation_eval.
  AtomProb prob_fn() const;
  std::map<GroundAtom, double> atom_probs() const;

  void set_tracked(bool tracked) { tracked_ = tracked; leaf_ids_.clear(); }
  // After a tracked execution: tape node id holding the predicate's tensor.
  int leaf_id(const std::string& pred) const;

  int object_count() const override { return n_; }
  DiffValue unary_attention(Tape& t, const std::string& token) override;
  DiffValue relation_attention(Tape& t, const std::string& rel) override;

 private:
  const ConceptVocabulary& vocab_;
  int n_;
  bool tracked_ = false;
  std::map<std::string, Tensor> unary_;     // concept -> n vector
  std::map<std::string, Tensor> relation_;  // rel -> n x n matrix
  std::map<std::string, int> leaf_ids_;     // valid for the most recent tape
};

}  // namespace nfol
