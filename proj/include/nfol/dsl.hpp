#pragma once

#include <string>
#include <vector>

#include "nfol/engine.hpp"
#include "nfol/fol.hpp"
#include "nfol/vocab.hpp"

namespace nfol {

// GQA-style question programs. Attention ops thread a set of scene objects
// through the program; terminal ops turn the final attention into a yes/no
// truth value or a candidate ranking.
enum class DslOpKind : uint8_t {
  GSelect,        // (name)                []          -> vec
  GFilter,        // (attr)                [vec]       -> vec
  GRelate,        // (name, rel, role)     [vec]       -> vec
  GVerifyAttr,    // (attr)                [vec]       -> scalar
  GVerifyRel,     // (name, rel, role)     [vec]       -> scalar
  GQuery,         // (category)            [vec]       -> list
  GChooseAttr,    // (attr, attr)          [vec]       -> list
  GChooseRel,     // (name, rel, rel, role)[vec]       -> list
  GExists,        // ()                    [vec]       -> scalar
  GAnd,           // ()                    [s, s]      -> scalar
  GOr,            // ()                    [s, s]      -> scalar
  GTwoSame,       // (category)            [vec, vec]  -> scalar
  GTwoDifferent,  // (category)            [vec, vec]  -> scalar
  GAllSame,       // (category)            [vec]       -> scalar
};

const char* dsl_op_name(DslOpKind k);

struct DslStep {
  DslOpKind op = DslOpKind::GSelect;
  std::vector<std::string> args;
  std::vector<int> inputs;

  bool operator==(const DslStep&) const = default;
};

struct DslProgram {
  std::vector<DslStep> steps;

  int length() const { return static_cast<int>(steps.size()); }
  bool open() const;
  bool operator==(const DslProgram&) const = default;
};

// Line format: "#i = Op(arg, ...) [#j, ...]"; steps numbered 0..n-1 in
// order. Parsing performs all structural and type checks that need no
// vocabulary: arities, reference direction, scalar/attention typing, the
// terminal-position rule, role tokens, and dead steps.
DslProgram parse_dsl(const std::string& text);
std::string print_dsl(const DslProgram& p);

// Concept, relation and category arguments must resolve in the vocabulary.
void check_against_vocab(const DslProgram& p, const ConceptVocabulary& vocab);

// Lowers each operator to the differentiable basic ops.
DfolProgram compile_dsl(const DslProgram& p, const ConceptVocabulary& vocab);

// First-order reading of the same program: one closed formula for binary
// programs, one per answer candidate for open ones. The formula shapes
// mirror the compiled arithmetic exactly, so the scalar product-semantics
// recursion over them reproduces the engine's exact mode.
std::vector<FormulaPtr> to_formulas(const DslProgram& p, const ConceptVocabulary& vocab);

// Candidate answer tokens for open programs, aligned with to_formulas and
// with the engine's candidate ordering; empty for binary programs.
std::vector<std::string> candidate_tokens(const DslProgram& p, const ConceptVocabulary& vocab);

}  // namespace nfol
