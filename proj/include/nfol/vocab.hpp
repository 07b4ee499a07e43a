#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace nfol {

uint64_t fnv1a64(std::string_view s);
std::string hex64(uint64_t v);

// Unary concepts grouped into named categories (name, color, ...) plus
// binary relation tokens. Categories are kept sorted by name so the flat
// unary layout -- and everything derived from it: feature blocks, network
// output columns, hashes -- survives a JSON round trip unchanged. Concepts
// within a category keep their listed order.
class ConceptVocabulary {
 public:
  ConceptVocabulary() = default;
  ConceptVocabulary(std::map<std::string, std::vector<std::string>> unary_categories,
                    std::vector<std::string> binary_relations);

  static ConceptVocabulary from_json_text(const std::string& text);
  std::string to_json_text() const;
  uint64_t hash() const;  // over the canonical serialization

  int unary_count() const { return static_cast<int>(unary_.size()); }
  int binary_count() const { return static_cast<int>(binary_.size()); }
  int category_count() const { return static_cast<int>(categories_.size()); }

  const std::vector<std::string>& unary_concepts() const { return unary_; }
  const std::vector<std::string>& binary_relations() const { return binary_; }
  const std::vector<std::string>& category_names() const { return categories_; }
  const std::vector<std::string>& concepts_of(const std::string& category) const;

  bool has_unary(const std::string& token) const;
  bool has_binary(const std::string& rel) const;
  bool has_category(const std::string& category) const;

  // Throwing lookups (Vocab errors).
  int unary_index(const std::string& token) const;
  int binary_index(const std::string& rel) const;
  const std::string& category_of(const std::string& token) const;

 private:
  void build_index();
  void validate() const;

  std::vector<std::string> categories_;                      // sorted
  std::map<std::string, std::vector<std::string>> concepts_; // category -> concepts
  std::vector<std::string> binary_;
  std::vector<std::string> unary_;                           // flat, category-major
  std::map<std::string, int> unary_idx_;
  std::map<std::string, int> binary_idx_;
  std::map<std::string, std::string> concept_category_;
};

// The fixed vocabulary the generator uses.
ConceptVocabulary default_vocabulary();

}  // namespace nfol
