#pragma once

#include <array>
#include <string>
#include <tuple>
#include <vector>

#include "nfol/autodiff.hpp"
#include "nfol/vocab.hpp"

namespace nfol {

struct SceneObject {
  int id = 0;
  std::string name;
  std::vector<std::string> attributes;
  std::array<double, 4> bbox{0, 0, 0, 0};  // x, y, w, h; normalized
};

// Ground-truth scene: objects with ids 0..n-1 and directed relation triples
// (subject, relation, object).
struct SceneGraph {
  std::vector<SceneObject> objects;
  std::vector<std::tuple<int, std::string, int>> relations;

  int size() const { return static_cast<int>(objects.size()); }
  bool has_relation(int s, const std::string& rel, int o) const;
};

// Throws Data/Vocab/Index errors on: non-contiguous ids, unknown concepts,
// out-of-range or self-referent relations, duplicate triples, bbox outside
// the unit square.
void validate_scene(const SceneGraph& scene, const ConceptVocabulary& vocab);

// Golden ground-truth lookups: exact 0/1 tensors.
Tensor golden_unary(const SceneGraph& scene, const ConceptVocabulary& vocab,
                    const std::string& token);
Tensor golden_binary(const SceneGraph& scene, const ConceptVocabulary& vocab,
                     const std::string& rel);

SceneGraph scene_from_json_text(const std::string& text);
std::string scene_to_json_text(const SceneGraph& scene);

}  // namespace nfol
