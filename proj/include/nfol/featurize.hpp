#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "nfol/scene.hpp"
#include "nfol/vocab.hpp"

namespace nfol {

// Perception corruption knob. rho: per-object probability that one active
// concept indicator is swapped for another concept of the same category.
// sigma: scale of zero-mean Gaussian noise added to the concept block.
struct CorruptionSpec {
  double rho = 0.0;
  double sigma = 0.0;
};

// One feature vector per object: multi-hot concept block (flat unary layout)
// followed by the 4 bbox values. Derived deterministically from
// (scene, spec, seed), never stored on disk.
struct Featurization {
  int dim = 0;  // unary_count + 4
  std::vector<std::vector<double>> vectors;

  int size() const { return static_cast<int>(vectors.size()); }
};

Featurization make_featurization(const SceneGraph& scene, const ConceptVocabulary& vocab,
                                 const CorruptionSpec& spec, uint64_t seed);

// Thresholds the concept block at 0.5 and reads back name/attributes; used by
// tests to confirm the clean featurization is invertible.
struct DecodedObject {
  std::string name;
  std::vector<std::string> attributes;
};
DecodedObject decode_object(const std::vector<double>& features,
                            const ConceptVocabulary& vocab);

// Stable per-scene stream seed so every command featurizes a given scene the
// same way for the same --seed.
uint64_t scene_stream_seed(uint64_t seed, const std::string& scene_id);

}  // namespace nfol
