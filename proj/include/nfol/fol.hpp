#pragma once

#include <functional>
#include <map>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include "nfol/scene.hpp"
#include "nfol/vocab.hpp"

namespace nfol {

enum class Quantifier { Exists, ForAll, NotExists };

const char* quantifier_name(Quantifier q);

// First-order formulas over unary atoms pred(X) and binary relation atoms
// pred(X, Y), with quantifier-prefix structure. Immutable, shared subtrees.
struct Formula;
using FormulaPtr = std::shared_ptr<const Formula>;

struct Formula {
  enum class Kind { Atom, RelAtom, Not, And, Or, Quant };
  Kind kind;
  std::string pred;          // Atom / RelAtom
  std::string var_a;         // Atom: the variable; RelAtom: subject; Quant: bound variable
  std::string var_b;         // RelAtom: object
  Quantifier q = Quantifier::Exists;
  FormulaPtr left, right;    // Not/Quant use left only
};

FormulaPtr make_atom(std::string pred, std::string var);
FormulaPtr make_rel(std::string pred, std::string subject_var, std::string object_var);
FormulaPtr make_not(FormulaPtr f);
FormulaPtr make_and(FormulaPtr a, FormulaPtr b);
FormulaPtr make_or(FormulaPtr a, FormulaPtr b);
FormulaPtr make_quant(Quantifier q, std::string var, FormulaPtr body);

bool formula_equal(const Formula& a, const Formula& b);
std::set<std::string> free_variables(const Formula& f);

// S-expression text form, e.g.
//   (exists X (and (atom chair X) (forall Y (rel left X Y))))
FormulaPtr parse_formula(const std::string& text);
std::string print_formula(const Formula& f);

// Self-pair rule, the single source of truth shared by every evaluator here
// and mirrored by the engine's diagonal mask: when aggregating a quantifier
// over variable v, object ids already bound to v's relation partners inside
// the body are skipped, so a relation atom never gets instantiated with both
// ends on the same object.
std::set<int> quantifier_exclusions(const Formula& body, const std::string& var,
                                    const std::map<std::string, int>& env);

// Classical evaluation with a caller-supplied atom decider
// (pred, i, j) -> bool, j < 0 for unary atoms. f must be closed.
using AtomDecider = std::function<bool(const std::string&, int, int)>;
bool crisp_eval_with(const Formula& f, int n_objects, const AtomDecider& decider);

// Classical evaluation against a golden scene.
bool crisp_eval(const Formula& f, const SceneGraph& scene, const ConceptVocabulary& vocab);

// Product semantics: quantifiers aggregate with
//   forall  -> prod a_i,   exists -> 1 - prod (1 - a_i),   nexists -> prod (1 - a_i)
// and connectives combine as if their operands were independent
// (and -> x*y, or -> 1-(1-x)(1-y), not -> 1-x). This is the scalar recursion
// the vectorized engine must reproduce.
using AtomProb = std::function<double(const std::string&, int, int)>;
double product_semantics_eval(const Formula& f, int n_objects, const AtomProb& prob);

struct GroundAtom {
  std::string pred;
  int i = 0;
  int j = -1;  // -1 for unary
  auto operator<=>(const GroundAtom&) const = default;
};

// Every distinct ground atom reachable from f over a domain of n objects
// (exclusion rule applied, so masked diagonal instantiations do not count).
std::set<GroundAtom> collect_ground_atoms(const Formula& f, int n_objects);

// Exact expectation of the crisp truth value when each ground atom is an
// independent Bernoulli with the given probability. Enumerates all 2^k joint
// outcomes; throws a Capacity error when k > 20. Agrees with
// product_semantics_eval exactly when no ground atom occurs twice.
double atom_expectation_eval(const Formula& f, int n_objects,
                             const std::map<GroundAtom, double>& probs);

}  // namespace nfol
