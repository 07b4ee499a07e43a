#pragma once

#include <optional>
#include <string>
#include <vector>

#include "nfol/autodiff.hpp"
#include "nfol/calibration.hpp"
#include "nfol/fol.hpp"
#include "nfol/oracle.hpp"

namespace nfol {

// Which argument slot of a relation the current attention variable fills.
// Subject keeps the relation matrix as produced by the oracle (rows index
// the subject); Object transposes it first.
enum class Role : uint8_t { Subject, Object };

Role parse_role(const std::string& s);
std::string role_name(Role r);

// One differentiable operator. A program is a flat DAG over step outputs:
// attention vectors flow through One/Filter/Relate/Neg/VecAnd, Aggregate
// reduces a vector to a scalar truth value, the Scalar* ops combine truth
// values, and QueryList collects one scalar per answer candidate.
enum class DfolOpKind : uint8_t {
  One,        // ()            -> vec   all-ones attention
  Filter,     // (vec)         -> vec   alpha(concept) * input
  Relate,     // (vec)         -> vec   quantified relation product
  Neg,        // (vec)         -> vec   1 - input
  VecAnd,     // (vec, vec)    -> vec   elementwise product
  Aggregate,  // (vec)         -> scalar
  ScalarAnd,  // (scalar, scalar) -> scalar  x * y
  ScalarOr,   // (scalar, scalar) -> scalar  1 - (1-x)(1-y)
  ScalarNot,  // (scalar)      -> scalar     1 - x
  QueryList,  // (scalar...)   -> list       terminal only
};

struct DfolStep {
  DfolOpKind kind = DfolOpKind::One;
  std::vector<int> inputs;            // earlier step indices
  std::vector<std::string> concepts;  // Filter: one concept; Relate: relation
                                      // tokens; QueryList: candidate tokens
  Role role = Role::Subject;          // Relate: role of the output variable
  Quantifier quant = Quantifier::Exists;  // Relate and Aggregate
};

struct DfolProgram {
  std::vector<DfolStep> steps;
  bool open() const {
    return !steps.empty() && steps.back().kind == DfolOpKind::QueryList;
  }
};

// Shape, reference and typing checks; throws ErrorKind::Contract.
void validate_program(const DfolProgram& p);

struct ExecOptions {
  ExecMode mode = ExecMode::Exact;
  // Applied to each Filter/Relate output when set.
  const CalibrationApplier* calibration = nullptr;
};

struct EngineOutput {
  bool open = false;
  DiffValue terminal;                      // binary programs
  std::vector<DiffValue> candidate_values; // open programs
  std::vector<std::string> candidates;
  std::vector<DiffValue> step_values;      // one per program step
};

EngineOutput execute(const DfolProgram& p, VisualOracle& oracle, Tape& tape,
                     const ExecOptions& opt = {});

struct Answer {
  bool open = false;
  std::string text;  // "yes"/"no" or the winning candidate token
  double likelihood = 0.0;
  std::vector<std::string> candidates;
  std::vector<double> candidate_likelihoods;
};

// Binary: yes iff the terminal likelihood exceeds theta. Open: the candidate
// with the highest likelihood, ties resolved to the lowest index.
Answer decide(const EngineOutput& out, double theta = 0.5);
Answer answer(const DfolProgram& p, VisualOracle& oracle, double theta = 0.5,
              const ExecOptions& opt = {});

// Scalar reference semantics evaluated over the oracle's attentions. The
// engine's exact mode must match this to within 1e-9 for any program shape
// the compiler emits.
double reference_eval(const FormulaPtr& f, VisualOracle& oracle);

// Individual operators, exposed for focused tests.
DiffValue op_one(Tape& t, int n);
DiffValue op_filter(Tape& t, const DiffValue& concept_att, const DiffValue& in);
DiffValue op_neg(Tape& t, const DiffValue& in);
DiffValue op_vec_and(Tape& t, const DiffValue& a, const DiffValue& b);
DiffValue op_scalar_and(Tape& t, const DiffValue& a, const DiffValue& b);
DiffValue op_scalar_or(Tape& t, const DiffValue& a, const DiffValue& b);
DiffValue op_scalar_not(Tape& t, const DiffValue& x);

// A_q over a vector of memberships. Empty input: ForAll/NotExists -> 1,
// Exists -> 0.
DiffValue aggregate(Tape& t, Quantifier q, const DiffValue& v, ExecMode mode);

// out_i = A_q over j != i of (m_ij * v_j). The diagonal skip implements the
// convention that an object never witnesses a relation with itself.
DiffValue q_product(Tape& t, const DiffValue& m, const DiffValue& v,
                    Quantifier q, ExecMode mode);

// Relate: elementwise product of the relation matrices (oracle layout has
// rows as subject), transposed when the output variable is the object, then
// the quantified product against the input attention.
DiffValue op_relate(Tape& t, const std::vector<DiffValue>& rel_atts,
                    Role out_role, Quantifier q, const DiffValue& in,
                    ExecMode mode);

}  // namespace nfol
