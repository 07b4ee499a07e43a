#pragma once

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>

#include <nfol/error.hpp>
#include <nfol/scene.hpp>
#include <nfol/vocab.hpp>

// Asserts that `expr` throws nfol::Error with the given kind.
#define CHECK_KIND(expr, k)                   \
  do {                                        \
    bool threw_ = false;                      \
    try {                                     \
      expr;                                   \
    } catch (const nfol::Error& e_) {         \
      threw_ = true;                          \
      CHECK(e_.kind == (k));                  \
    }                                         \
    CHECK_MESSAGE(threw_, "expected " #expr " to throw"); \
  } while (0)

namespace testutil {

inline std::string make_temp_dir() {
  std::string tmpl = "/tmp/nfol_test_XXXXXX";
  char* p = mkdtemp(tmpl.data());
  if (!p) throw std::runtime_error("mkdtemp failed");
  return std::string(p);
}

inline std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void spit(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
}

// Two objects: 0 is a red wood chair on the left, 1 is a blue metal table on
// the right. Pinned by hand so expected attention values are obvious.
inline nfol::SceneGraph two_object_scene() {
  nfol::SceneGraph s;
  nfol::SceneObject a;
  a.id = 0;
  a.name = "chair";
  a.attributes = {"red", "wood", "small"};
  a.bbox = {0.1, 0.4, 0.2, 0.2};
  nfol::SceneObject b;
  b.id = 1;
  b.name = "table";
  b.attributes = {"blue", "metal", "large"};
  b.bbox = {0.6, 0.4, 0.3, 0.3};
  s.objects = {a, b};
  s.relations = {{0, "left", 1}, {1, "right", 0}};
  return s;
}

}  // namespace testutil
