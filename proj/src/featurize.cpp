#include "nfol/featurize.hpp"

#include <algorithm>
#include <random>

#include "nfol/error.hpp"

namespace nfol {

uint64_t scene_stream_seed(uint64_t seed, const std::string& scene_id) {
  return fnv1a64(scene_id) ^ (seed * 0x9e3779b97f4a7c15ull);
}

Featurization make_featurization(const SceneGraph& scene, const ConceptVocabulary& vocab,
                                 const CorruptionSpec& spec, uint64_t seed) {
  if (spec.rho < 0.0 || spec.rho > 1.0)
    throw Error(ErrorKind::Contract, "featurize: rho must lie in [0,1]");
  if (spec.sigma < 0.0) throw Error(ErrorKind::Contract, "featurize: sigma must be >= 0");

  const int u = vocab.unary_count();
  Featurization feats;
  feats.dim = u + 4;
  feats.vectors.reserve(scene.objects.size());

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> noise(0.0, 1.0);

  for (const SceneObject& obj : scene.objects) {
    std::vector<double> v(static_cast<size_t>(feats.dim), 0.0);
    std::vector<int> active;
    active.push_back(vocab.unary_index(obj.name));
    for (const std::string& a : obj.attributes) active.push_back(vocab.unary_index(a));
    for (int idx : active) v[idx] = 1.0;

    // With probability rho, one active indicator moves to a different concept
    // of the same category.
    if (spec.rho > 0.0 && unit(rng) < spec.rho && !active.empty()) {
      std::uniform_int_distribution<size_t> pick(0, active.size() - 1);
      const int victim = active[pick(rng)];
      const std::string& cat = vocab.category_of(vocab.unary_concepts()[victim]);
      const auto& peers = vocab.concepts_of(cat);
      if (peers.size() > 1) {
        std::uniform_int_distribution<size_t> alt(0, peers.size() - 2);
        size_t k = alt(rng);
        // skip over the victim itself
        int replacement = vocab.unary_index(peers[k]);
        if (replacement >= victim) replacement = vocab.unary_index(peers[k + 1]);
        v[victim] = 0.0;
        v[replacement] = 1.0;
      }
    }

    if (spec.sigma > 0.0) {
      for (int i = 0; i < u; ++i) v[i] += spec.sigma * noise(rng);
    }
    for (int i = 0; i < u; ++i) v[i] = std::clamp(v[i], 0.0, 1.0);
    for (int k = 0; k < 4; ++k) v[u + k] = obj.bbox[k];
    feats.vectors.push_back(std::move(v));
  }
  return feats;
}

DecodedObject decode_object(const std::vector<double>& features,
                            const ConceptVocabulary& vocab) {
  if (static_cast<int>(features.size()) != vocab.unary_count() + 4)
    throw Error(ErrorKind::Shape, "decode_object: feature dimension mismatch");
  DecodedObject out;
  for (int i = 0; i < vocab.unary_count(); ++i) {
    if (features[i] <= 0.5) continue;
    const std::string& c = vocab.unary_concepts()[i];
    if (vocab.category_of(c) == "name")
      out.name = c;
    else
      out.attributes.push_back(c);
  }
  return out;
}

}  // namespace nfol
