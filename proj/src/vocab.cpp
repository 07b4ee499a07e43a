#include "nfol/vocab.hpp"

#include <algorithm>
#include <set>

#include <json.hpp>

#include "nfol/error.hpp"

namespace nfol {

uint64_t fnv1a64(std::string_view s) {
  uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

std::string hex64(uint64_t v) {
  static const char* digits = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[i] = digits[v & 0xf];
    v >>= 4;
  }
  return out;
}

namespace {

bool valid_token(const std::string& t) {
  if (t.empty()) return false;
  for (char c : t)
    if (!(std::islower(static_cast<unsigned char>(c)) ||
          std::isdigit(static_cast<unsigned char>(c)) || c == '_'))
      return false;
  return true;
}

}  // namespace

ConceptVocabulary::ConceptVocabulary(
    std::map<std::string, std::vector<std::string>> unary_categories,
    std::vector<std::string> binary_relations)
    : concepts_(std::move(unary_categories)), binary_(std::move(binary_relations)) {
  for (const auto& [cat, _] : concepts_) categories_.push_back(cat);
  build_index();
  validate();
}

void ConceptVocabulary::build_index() {
  unary_.clear();
  unary_idx_.clear();
  binary_idx_.clear();
  concept_category_.clear();
  for (const std::string& cat : categories_)
    for (const std::string& c : concepts_.at(cat)) {
      unary_idx_[c] = static_cast<int>(unary_.size());
      unary_.push_back(c);
      concept_category_[c] = cat;
    }
  for (size_t i = 0; i < binary_.size(); ++i) binary_idx_[binary_[i]] = static_cast<int>(i);
}

void ConceptVocabulary::validate() const {
  std::set<std::string> seen;
  for (const std::string& cat : categories_) {
    if (!valid_token(cat)) throw Error(ErrorKind::Vocab, "bad category token: " + cat);
    const auto& cs = concepts_.at(cat);
    if (cs.empty()) throw Error(ErrorKind::Vocab, "empty category: " + cat);
    for (const std::string& c : cs) {
      if (!valid_token(c)) throw Error(ErrorKind::Vocab, "bad concept token: " + c);
      if (!seen.insert(c).second) throw Error(ErrorKind::Vocab, "duplicate token: " + c);
    }
  }
  for (const std::string& r : binary_) {
    if (!valid_token(r)) throw Error(ErrorKind::Vocab, "bad relation token: " + r);
    if (!seen.insert(r).second) throw Error(ErrorKind::Vocab, "duplicate token: " + r);
  }
  if (unary_.empty()) throw Error(ErrorKind::Vocab, "vocabulary has no unary concepts");
}

const std::vector<std::string>& ConceptVocabulary::concepts_of(const std::string& category) const {
  auto it = concepts_.find(category);
  if (it == concepts_.end()) throw Error(ErrorKind::Vocab, "unknown category: " + category);
  return it->second;
}

bool ConceptVocabulary::has_unary(const std::string& c) const { return unary_idx_.count(c) > 0; }
bool ConceptVocabulary::has_binary(const std::string& r) const { return binary_idx_.count(r) > 0; }
bool ConceptVocabulary::has_category(const std::string& c) const { return concepts_.count(c) > 0; }

int ConceptVocabulary::unary_index(const std::string& c) const {
  auto it = unary_idx_.find(c);
  if (it == unary_idx_.end()) throw Error(ErrorKind::Vocab, "unknown concept: " + c);
  return it->second;
}

int ConceptVocabulary::binary_index(const std::string& r) const {
  auto it = binary_idx_.find(r);
  if (it == binary_idx_.end()) throw Error(ErrorKind::Vocab, "unknown relation: " + r);
  return it->second;
}

const std::string& ConceptVocabulary::category_of(const std::string& c) const {
  auto it = concept_category_.find(c);
  if (it == concept_category_.end()) throw Error(ErrorKind::Vocab, "unknown concept: " + c);
  return it->second;
}

ConceptVocabulary ConceptVocabulary::from_json_text(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::Data, std::string("vocab json: ") + e.what());
  }
  if (!j.is_object() || !j.contains("unary") || !j.contains("binary"))
    throw Error(ErrorKind::Data, "vocab json: expected {unary, binary}");
  std::map<std::string, std::vector<std::string>> cats;
  for (const auto& [cat, arr] : j.at("unary").items()) {
    if (!arr.is_array()) throw Error(ErrorKind::Data, "vocab json: category must be an array");
    cats[cat] = arr.get<std::vector<std::string>>();
  }
  return ConceptVocabulary(std::move(cats), j.at("binary").get<std::vector<std::string>>());
}

std::string ConceptVocabulary::to_json_text() const {
  nlohmann::json unary = nlohmann::json::object();
  for (const std::string& cat : categories_) unary[cat] = concepts_.at(cat);
  nlohmann::json j;
  j["unary"] = unary;
  j["binary"] = binary_;
  return j.dump(2) + "\n";
}

uint64_t ConceptVocabulary::hash() const { return fnv1a64(to_json_text()); }

ConceptVocabulary default_vocabulary() {
  return ConceptVocabulary(
      {
          {"name", {"chair", "table", "lamp", "sofa", "shelf", "mug", "book", "plant"}},
          {"color", {"red", "blue", "green", "white", "black", "brown"}},
          {"material", {"wood", "metal", "glass", "plastic"}},
          {"size", {"small", "large"}},
      },
      {"left", "right", "on", "holding"});
}

}  // namespace nfol
