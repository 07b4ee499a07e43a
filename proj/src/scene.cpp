#include "nfol/scene.hpp"

#include <set>

#include <json.hpp>

#include "nfol/error.hpp"

namespace nfol {

bool SceneGraph::has_relation(int s, const std::string& rel, int o) const {
  for (const auto& [a, r, b] : relations)
    if (a == s && b == o && r == rel) return true;
  return false;
}

void validate_scene(const SceneGraph& scene, const ConceptVocabulary& vocab) {
  const int n = scene.size();
  for (int i = 0; i < n; ++i) {
    const SceneObject& obj = scene.objects[i];
    if (obj.id != i)
      throw Error(ErrorKind::Data, "scene: object ids must be 0..n-1 in order");
    if (!vocab.has_unary(obj.name) || vocab.category_of(obj.name) != "name")
      throw Error(ErrorKind::Vocab, "scene: unknown object name: " + obj.name);
    for (const std::string& a : obj.attributes) {
      if (!vocab.has_unary(a)) throw Error(ErrorKind::Vocab, "scene: unknown attribute: " + a);
      if (vocab.category_of(a) == "name")
        throw Error(ErrorKind::Vocab, "scene: name token used as attribute: " + a);
    }
    for (double v : obj.bbox)
      if (!(v >= 0.0 && v <= 1.0))
        throw Error(ErrorKind::Data, "scene: bbox values must lie in [0,1]");
  }
  std::set<std::tuple<int, std::string, int>> seen;
  for (const auto& [s, rel, o] : scene.relations) {
    if (s < 0 || s >= n || o < 0 || o >= n)
      throw Error(ErrorKind::Index, "scene: relation endpoint out of range");
    if (s == o) throw Error(ErrorKind::Data, "scene: self-relations are not allowed");
    if (!vocab.has_binary(rel)) throw Error(ErrorKind::Vocab, "scene: unknown relation: " + rel);
    if (!seen.insert({s, rel, o}).second)
      throw Error(ErrorKind::Data, "scene: duplicate relation triple");
  }
}

Tensor golden_unary(const SceneGraph& scene, const ConceptVocabulary& vocab,
                    const std::string& token) {
  if (!vocab.has_unary(token)) throw Error(ErrorKind::Vocab, "unknown concept: " + token);
  Tensor out = Tensor::vector(scene.size(), 0.0);
  for (int i = 0; i < scene.size(); ++i) {
    const SceneObject& obj = scene.objects[i];
    bool holds = obj.name == token;
    for (const std::string& a : obj.attributes) holds |= (a == token);
    out.data[i] = holds ? 1.0 : 0.0;
  }
  return out;
}

Tensor golden_binary(const SceneGraph& scene, const ConceptVocabulary& vocab,
                     const std::string& rel) {
  if (!vocab.has_binary(rel)) throw Error(ErrorKind::Vocab, "unknown relation: " + rel);
  Tensor out = Tensor::matrix(scene.size(), scene.size(), 0.0);
  for (const auto& [s, r, o] : scene.relations)
    if (r == rel) out.at(s, o) = 1.0;
  return out;
}

SceneGraph scene_from_json_text(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::Data, std::string("scene json: ") + e.what());
  }
  SceneGraph scene;
  try {
    for (const auto& jo : j.at("objects")) {
      SceneObject obj;
      obj.id = jo.at("id").get<int>();
      obj.name = jo.at("name").get<std::string>();
      obj.attributes = jo.at("attributes").get<std::vector<std::string>>();
      auto bb = jo.at("bbox").get<std::vector<double>>();
      if (bb.size() != 4) throw Error(ErrorKind::Data, "scene json: bbox must have 4 entries");
      for (int k = 0; k < 4; ++k) obj.bbox[k] = bb[k];
      scene.objects.push_back(std::move(obj));
    }
    for (const auto& jr : j.at("relations")) {
      if (!jr.is_array() || jr.size() != 3)
        throw Error(ErrorKind::Data, "scene json: relation must be [subject, token, object]");
      scene.relations.emplace_back(jr.at(0).get<int>(), jr.at(1).get<std::string>(),
                                   jr.at(2).get<int>());
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::Data, std::string("scene json: ") + e.what());
  }
  return scene;
}

std::string scene_to_json_text(const SceneGraph& scene) {
  nlohmann::json objects = nlohmann::json::array();
  for (const SceneObject& obj : scene.objects) {
    nlohmann::json jo;
    jo["id"] = obj.id;
    jo["name"] = obj.name;
    jo["attributes"] = obj.attributes;
    jo["bbox"] = obj.bbox;
    objects.push_back(std::move(jo));
  }
  nlohmann::json relations = nlohmann::json::array();
  for (const auto& [s, rel, o] : scene.relations)
    relations.push_back(nlohmann::json::array({s, rel, o}));
  nlohmann::json j;
  j["objects"] = std::move(objects);
  j["relations"] = std::move(relations);
  return j.dump();
}

}  // namespace nfol
