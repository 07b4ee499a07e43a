#include "nfol/engine.hpp"

#include <map>

namespace nfol {

Role parse_role(const std::string& s) {
  if (s == "subject") return Role::Subject;
  if (s == "object") return Role::Object;
  throw Error(ErrorKind::Parse, "role must be 'subject' or 'object', got '" + s + "'");
}

std::string role_name(Role r) {
  return r == Role::Subject ? "subject" : "object";
}

namespace {

enum class ValType { Vec, Scalar, List };

ValType result_type(DfolOpKind k) {
  switch (k) {
    case DfolOpKind::One:
    case DfolOpKind::Filter:
    case DfolOpKind::Relate:
    case DfolOpKind::Neg:
    case DfolOpKind::VecAnd:
      return ValType::Vec;
    case DfolOpKind::Aggregate:
    case DfolOpKind::ScalarAnd:
    case DfolOpKind::ScalarOr:
    case DfolOpKind::ScalarNot:
      return ValType::Scalar;
    case DfolOpKind::QueryList:
      return ValType::List;
  }
  throw Error(ErrorKind::Contract, "unknown operator kind");
}

const char* kind_name(DfolOpKind k) {
  switch (k) {
    case DfolOpKind::One: return "One";
    case DfolOpKind::Filter: return "Filter";
    case DfolOpKind::Relate: return "Relate";
    case DfolOpKind::Neg: return "Neg";
    case DfolOpKind::VecAnd: return "VecAnd";
    case DfolOpKind::Aggregate: return "Aggregate";
    case DfolOpKind::ScalarAnd: return "ScalarAnd";
    case DfolOpKind::ScalarOr: return "ScalarOr";
    case DfolOpKind::ScalarNot: return "ScalarNot";
    case DfolOpKind::QueryList: return "QueryList";
  }
  return "?";
}

struct Arity {
  int inputs;  // -1: one or more
  ValType in_type;
};

Arity arity_of(DfolOpKind k) {
  switch (k) {
    case DfolOpKind::One: return {0, ValType::Vec};
    case DfolOpKind::Filter:
    case DfolOpKind::Relate:
    case DfolOpKind::Neg:
    case DfolOpKind::Aggregate: return {1, ValType::Vec};
    case DfolOpKind::VecAnd: return {2, ValType::Vec};
    case DfolOpKind::ScalarAnd:
    case DfolOpKind::ScalarOr: return {2, ValType::Scalar};
    case DfolOpKind::ScalarNot: return {1, ValType::Scalar};
    case DfolOpKind::QueryList: return {-1, ValType::Scalar};
  }
  throw Error(ErrorKind::Contract, "unknown operator kind");
}

[[noreturn]] void bad_step(size_t i, DfolOpKind k, const std::string& why) {
  throw Error(ErrorKind::Contract, "step " + std::to_string(i) + " (" +
                                       kind_name(k) + "): " + why);
}

}  // namespace

void validate_program(const DfolProgram& p) {
  if (p.steps.empty())
    throw Error(ErrorKind::Contract, "program has no steps");
  const size_t last = p.steps.size() - 1;
  std::vector<bool> used(p.steps.size(), false);
  for (size_t i = 0; i < p.steps.size(); ++i) {
    const DfolStep& s = p.steps[i];
    const Arity a = arity_of(s.kind);
    if (a.inputs >= 0 && static_cast<int>(s.inputs.size()) != a.inputs)
      bad_step(i, s.kind, "expects " + std::to_string(a.inputs) + " inputs, got " +
                              std::to_string(s.inputs.size()));
    if (a.inputs < 0 && s.inputs.empty())
      bad_step(i, s.kind, "expects at least one input");
    for (int in : s.inputs) {
      if (in < 0 || static_cast<size_t>(in) >= i)
        bad_step(i, s.kind, "input #" + std::to_string(in) + " is not an earlier step");
      if (result_type(p.steps[in].kind) != a.in_type)
        bad_step(i, s.kind, "input #" + std::to_string(in) + " has the wrong type");
      used[in] = true;
    }
    switch (s.kind) {
      case DfolOpKind::Filter:
        if (s.concepts.size() != 1) bad_step(i, s.kind, "needs exactly one concept");
        break;
      case DfolOpKind::Relate:
        if (s.concepts.empty()) bad_step(i, s.kind, "needs at least one relation");
        break;
      case DfolOpKind::QueryList:
        if (i != last) bad_step(i, s.kind, "must be the final step");
        if (s.concepts.size() != s.inputs.size())
          bad_step(i, s.kind, "needs one candidate token per input");
        break;
      default:
        if (!s.concepts.empty()) bad_step(i, s.kind, "takes no concept arguments");
        break;
    }
  }
  if (result_type(p.steps[last].kind) == ValType::Vec)
    throw Error(ErrorKind::Contract, "final step must produce a truth value or candidate list");
  for (size_t i = 0; i < last; ++i) {
    if (!used[i])
      throw Error(ErrorKind::Contract, "step " + std::to_string(i) + " is never consumed");
  }
}

DiffValue op_one(Tape&, int n) {
  if (n < 0) throw Error(ErrorKind::Contract, "negative domain size");
  return constant(Tensor::vector(n, 1.0));
}

DiffValue op_filter(Tape& t, const DiffValue& concept_att, const DiffValue& in) {
  if (!concept_att.value.same_shape(in.value))
    throw Error(ErrorKind::Shape, "Filter attention and input differ in shape");
  return mul(t, concept_att, in);
}

DiffValue op_neg(Tape& t, const DiffValue& in) {
  return sub(t, constant(1.0), in);
}

DiffValue op_vec_and(Tape& t, const DiffValue& a, const DiffValue& b) {
  if (!a.value.same_shape(b.value))
    throw Error(ErrorKind::Shape, "VecAnd inputs differ in shape");
  return mul(t, a, b);
}

DiffValue op_scalar_and(Tape& t, const DiffValue& a, const DiffValue& b) {
  return mul(t, a, b);
}

DiffValue op_scalar_or(Tape& t, const DiffValue& a, const DiffValue& b) {
  const DiffValue one = constant(1.0);
  return sub(t, one, mul(t, sub(t, one, a), sub(t, one, b)));
}

DiffValue op_scalar_not(Tape& t, const DiffValue& x) {
  return sub(t, constant(1.0), x);
}

DiffValue aggregate(Tape& t, Quantifier q, const DiffValue& v, ExecMode mode) {
  if (mode == ExecMode::Exact) {
    switch (q) {
      case Quantifier::ForAll:
        return prod_all(t, v);
      case Quantifier::Exists:
        return sub(t, constant(1.0), prod_complement(t, v));
      case Quantifier::NotExists:
        return prod_complement(t, v);
    }
  } else {
    // log-space products keep gradients finite when memberships saturate
    const DiffValue body = q == Quantifier::ForAll
                               ? v
                               : sub(t, constant(1.0), v);
    const DiffValue prod = exp(t, sum(t, log(t, clamp(t, body, 1e-12, 1.0))));
    if (q == Quantifier::Exists) return sub(t, constant(1.0), prod);
    return prod;
  }
  throw Error(ErrorKind::Contract, "unknown quantifier");
}

DiffValue q_product(Tape& t, const DiffValue& m, const DiffValue& v,
                    Quantifier q, ExecMode mode) {
  if (m.value.rank != 2 || m.value.rows != m.value.cols)
    throw Error(ErrorKind::Shape, "relation attention must be a square matrix");
  const int n = m.value.rows;
  if (v.value.rank != 1 || v.value.rows != n)
    throw Error(ErrorKind::Shape, "input attention does not match the relation matrix");
  std::vector<DiffValue> outs;
  outs.reserve(n);
  for (int i = 0; i < n; ++i) {
    const DiffValue terms = mul(t, row_of(t, m, i), v);
    std::vector<int> keep;
    keep.reserve(n - 1);
    for (int j = 0; j < n; ++j)
      if (j != i) keep.push_back(j);
    outs.push_back(aggregate(t, q, gather(t, terms, std::move(keep)), mode));
  }
  return concat(t, outs);
}

DiffValue op_relate(Tape& t, const std::vector<DiffValue>& rel_atts,
                    Role out_role, Quantifier q, const DiffValue& in,
                    ExecMode mode) {
  if (rel_atts.empty())
    throw Error(ErrorKind::Contract, "Relate needs at least one relation attention");
  DiffValue m = rel_atts[0];
  for (size_t k = 1; k < rel_atts.size(); ++k) {
    if (!rel_atts[k].value.same_shape(m.value))
      throw Error(ErrorKind::Shape, "relation attentions differ in shape");
    m = mul(t, m, rel_atts[k]);
  }
  if (out_role == Role::Object) m = transpose(t, m);
  return q_product(t, m, in, q, mode);
}

namespace {

std::string relate_key_token(const DfolStep& s) {
  std::string key = s.concepts[0];
  for (size_t k = 1; k < s.concepts.size(); ++k) key += "+" + s.concepts[k];
  return key;
}

}  // namespace

EngineOutput execute(const DfolProgram& p, VisualOracle& oracle, Tape& tape,
                     const ExecOptions& opt) {
  validate_program(p);
  const int n = oracle.object_count();
  const bool training = opt.mode == ExecMode::Training;

  EngineOutput out;
  out.step_values.resize(p.steps.size());
  auto& vals = out.step_values;

  for (size_t i = 0; i < p.steps.size(); ++i) {
    const DfolStep& s = p.steps[i];
    switch (s.kind) {
      case DfolOpKind::One:
        vals[i] = op_one(tape, n);
        break;
      case DfolOpKind::Filter: {
        DiffValue att = oracle.unary_attention(tape, s.concepts[0]);
        if (att.value.rank != 1 || att.value.rows != n)
          throw Error(ErrorKind::Shape, "oracle returned a malformed unary attention");
        if (training) att = clamp(tape, att, 1e-7, 1.0 - 1e-7);
        DiffValue r = op_filter(tape, att, vals[s.inputs[0]]);
        if (opt.calibration)
          r = opt.calibration->apply(
              tape, ContextTable::make_key(s.concepts[0], static_cast<int>(i)), r,
              opt.mode);
        vals[i] = r;
        break;
      }
      case DfolOpKind::Relate: {
        std::vector<DiffValue> atts;
        atts.reserve(s.concepts.size());
        for (const auto& rel : s.concepts) {
          DiffValue att = oracle.relation_attention(tape, rel);
          if (att.value.rank != 2 || att.value.rows != n || att.value.cols != n)
            throw Error(ErrorKind::Shape, "oracle returned a malformed relation attention");
          if (training) att = clamp(tape, att, 1e-7, 1.0 - 1e-7);
          atts.push_back(att);
        }
        DiffValue r = op_relate(tape, atts, s.role, s.quant, vals[s.inputs[0]],
                                opt.mode);
        if (opt.calibration)
          r = opt.calibration->apply(
              tape, ContextTable::make_key(relate_key_token(s), static_cast<int>(i)),
              r, opt.mode);
        vals[i] = r;
        break;
      }
      case DfolOpKind::Neg:
        vals[i] = op_neg(tape, vals[s.inputs[0]]);
        break;
      case DfolOpKind::VecAnd:
        vals[i] = op_vec_and(tape, vals[s.inputs[0]], vals[s.inputs[1]]);
        break;
      case DfolOpKind::Aggregate:
        vals[i] = aggregate(tape, s.quant, vals[s.inputs[0]], opt.mode);
        break;
      case DfolOpKind::ScalarAnd:
        vals[i] = op_scalar_and(tape, vals[s.inputs[0]], vals[s.inputs[1]]);
        break;
      case DfolOpKind::ScalarOr:
        vals[i] = op_scalar_or(tape, vals[s.inputs[0]], vals[s.inputs[1]]);
        break;
      case DfolOpKind::ScalarNot:
        vals[i] = op_scalar_not(tape, vals[s.inputs[0]]);
        break;
      case DfolOpKind::QueryList: {
        out.open = true;
        out.candidates = s.concepts;
        for (int in : s.inputs) out.candidate_values.push_back(vals[in]);
        vals[i] = vals[s.inputs[0]];  // placeholder; lists have no tensor value
        break;
      }
    }
  }
  if (!out.open) out.terminal = vals.back();
  return out;
}

Answer decide(const EngineOutput& out, double theta) {
  Answer a;
  a.open = out.open;
  if (!out.open) {
    a.likelihood = out.terminal.value.scalar_value();
    a.text = a.likelihood > theta ? "yes" : "no";
    return a;
  }
  a.candidates = out.candidates;
  a.candidate_likelihoods.reserve(out.candidate_values.size());
  for (const auto& v : out.candidate_values)
    a.candidate_likelihoods.push_back(v.value.scalar_value());
  size_t best = 0;
  for (size_t k = 1; k < a.candidate_likelihoods.size(); ++k)
    if (a.candidate_likelihoods[k] > a.candidate_likelihoods[best]) best = k;
  a.text = a.candidates[best];
  a.likelihood = a.candidate_likelihoods[best];
  return a;
}

Answer answer(const DfolProgram& p, VisualOracle& oracle, double theta,
              const ExecOptions& opt) {
  Tape tape;
  return decide(execute(p, oracle, tape, opt), theta);
}

double reference_eval(const FormulaPtr& f, VisualOracle& oracle) {
  if (!f) throw Error(ErrorKind::Contract, "reference_eval: null formula");
  Tape scratch;
  const int n = oracle.object_count();
  std::map<std::string, Tensor> ucache;
  std::map<std::string, Tensor> rcache;
  AtomProb prob = [&](const std::string& pred, int i, int j) -> double {
    if (j < 0) {
      auto it = ucache.find(pred);
      if (it == ucache.end())
        it = ucache.emplace(pred, oracle.unary_attention(scratch, pred).value).first;
      return it->second[i];
    }
    auto it = rcache.find(pred);
    if (it == rcache.end())
      it = rcache.emplace(pred, oracle.relation_attention(scratch, pred).value).first;
    return it->second.at(i, j);
  };
  return product_semantics_eval(*f, n, prob);
}

}  // namespace nfol
