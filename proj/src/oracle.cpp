#include "nfol/oracle.hpp"

#include <random>

namespace nfol {

DiffValue GoldenOracle::unary_attention(Tape&, const std::string& token) {
  return constant(golden_unary(scene_, vocab_, token));
}

DiffValue GoldenOracle::relation_attention(Tape&, const std::string& rel) {
  return constant(golden_binary(scene_, vocab_, rel));
}

AtomTableOracle::AtomTableOracle(const ConceptVocabulary& vocab, int n_objects)
    : vocab_(vocab), n_(n_objects) {
  if (n_ <= 0) throw Error(ErrorKind::Contract, "oracle needs n >= 1 objects");
  for (const auto& c : vocab_.unary_concepts()) unary_[c] = Tensor::vector(n_, 0.0);
  for (const auto& r : vocab_.binary_relations())
    relation_[r] = Tensor::matrix(n_, n_, 0.0);
}

void AtomTableOracle::fill_random(uint64_t seed, double lo, double hi) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(lo, hi);
  for (auto& [name, t] : unary_) {
    (void)name;
    for (auto& v : t.data) v = dist(rng);
  }
  for (auto& [name, t] : relation_) {
    (void)name;
    for (auto& v : t.data) v = dist(rng);
  }
}

void AtomTableOracle::fill_crisp(const SceneGraph& scene) {
  if (scene.size() != n_)
    throw Error(ErrorKind::Contract, "scene size does not match oracle");
  for (auto& [token, t] : unary_) t = golden_unary(scene, vocab_, token);
  for (auto& [rel, t] : relation_) t = golden_binary(scene, vocab_, rel);
}

void AtomTableOracle::set_unary(const std::string& token, int i, double p) {
  auto it = unary_.find(token);
  if (it == unary_.end()) throw Error(ErrorKind::Vocab, "unknown concept: " + token);
  if (i < 0 || i >= n_) throw Error(ErrorKind::Index, "object index out of range");
  it->second[i] = p;
}

void AtomTableOracle::set_relation(const std::string& rel, int i, int j, double p) {
  auto it = relation_.find(rel);
  if (it == relation_.end()) throw Error(ErrorKind::Vocab, "unknown relation: " + rel);
  if (i < 0 || i >= n_ || j < 0 || j >= n_)
    throw Error(ErrorKind::Index, "object index out of range");
  it->second.at(i, j) = p;
}

double AtomTableOracle::unary(const std::string& token, int i) const {
  auto it = unary_.find(token);
  if (it == unary_.end()) throw Error(ErrorKind::Vocab, "unknown concept: " + token);
  if (i < 0 || i >= n_) throw Error(ErrorKind::Index, "object index out of range");
  return it->second[i];
}

double AtomTableOracle::relation(const std::string& rel, int i, int j) const {
  auto it = relation_.find(rel);
  if (it == relation_.end()) throw Error(ErrorKind::Vocab, "unknown relation: " + rel);
  if (i < 0 || i >= n_ || j < 0 || j >= n_)
    throw Error(ErrorKind::Index, "object index out of range");
  return it->second.at(i, j);
}

AtomProb AtomTableOracle::prob_fn() const {
  return [this](const std::string& pred, int i, int j) -> double {
    return j < 0 ? unary(pred, i) : relation(pred, i, j);
  };
}

std::map<GroundAtom, double> AtomTableOracle::atom_probs() const {
  std::map<GroundAtom, double> out;
  for (const auto& [token, t] : unary_) {
    for (int i = 0; i < n_; ++i) out[GroundAtom{token, i, -1}] = t[i];
  }
  for (const auto& [rel, t] : relation_) {
    for (int i = 0; i < n_; ++i)
      for (int j = 0; j < n_; ++j) out[GroundAtom{rel, i, j}] = t.at(i, j);
  }
  return out;
}

int AtomTableOracle::leaf_id(const std::string& pred) const {
  auto it = leaf_ids_.find(pred);
  if (it == leaf_ids_.end())
    throw Error(ErrorKind::Contract, "predicate was not queried: " + pred);
  return it->second;
}

DiffValue AtomTableOracle::unary_attention(Tape& t, const std::string& token) {
  auto it = unary_.find(token);
  if (it == unary_.end()) throw Error(ErrorKind::Vocab, "unknown concept: " + token);
  if (!tracked_) return constant(it->second);
  auto found = leaf_ids_.find(token);
  if (found != leaf_ids_.end())
    return DiffValue(t.node(found->second).value, found->second);
  DiffValue leaf = t.leaf(it->second, true);
  leaf_ids_[token] = leaf.id;
  return leaf;
}

DiffValue AtomTableOracle::relation_attention(Tape& t, const std::string& rel) {
  auto it = relation_.find(rel);
  if (it == relation_.end()) throw Error(ErrorKind::Vocab, "unknown relation: " + rel);
  if (!tracked_) return constant(it->second);
  auto found = leaf_ids_.find(rel);
  if (found != leaf_ids_.end())
    return DiffValue(t.node(found->second).value, found->second);
  DiffValue leaf = t.leaf(it->second, true);
  leaf_ids_[rel] = leaf.id;
  return leaf;
}

}  // namespace nfol
