#include "nfol/dsl.hpp"

#include <algorithm>
#include <array>
#include <sstream>

namespace nfol {

namespace {

enum class ValKind { Vec, Scalar, List };

struct OpInfo {
  DslOpKind kind;
  const char* name;
  int args;
  int inputs;
  ValKind in;
  ValKind out;
};

constexpr std::array<OpInfo, 14> kOps{{
    {DslOpKind::GSelect, "GSelect", 1, 0, ValKind::Vec, ValKind::Vec},
    {DslOpKind::GFilter, "GFilter", 1, 1, ValKind::Vec, ValKind::Vec},
    {DslOpKind::GRelate, "GRelate", 3, 1, ValKind::Vec, ValKind::Vec},
    {DslOpKind::GVerifyAttr, "GVerifyAttr", 1, 1, ValKind::Vec, ValKind::Scalar},
    {DslOpKind::GVerifyRel, "GVerifyRel", 3, 1, ValKind::Vec, ValKind::Scalar},
    {DslOpKind::GQuery, "GQuery", 1, 1, ValKind::Vec, ValKind::List},
    {DslOpKind::GChooseAttr, "GChooseAttr", 2, 1, ValKind::Vec, ValKind::List},
    {DslOpKind::GChooseRel, "GChooseRel", 4, 1, ValKind::Vec, ValKind::List},
    {DslOpKind::GExists, "GExists", 0, 1, ValKind::Vec, ValKind::Scalar},
    {DslOpKind::GAnd, "GAnd", 0, 2, ValKind::Scalar, ValKind::Scalar},
    {DslOpKind::GOr, "GOr", 0, 2, ValKind::Scalar, ValKind::Scalar},
    {DslOpKind::GTwoSame, "GTwoSame", 1, 2, ValKind::Vec, ValKind::Scalar},
    {DslOpKind::GTwoDifferent, "GTwoDifferent", 1, 2, ValKind::Vec, ValKind::Scalar},
    {DslOpKind::GAllSame, "GAllSame", 1, 1, ValKind::Vec, ValKind::Scalar},
}};

const OpInfo& info_of(DslOpKind k) {
  for (const auto& o : kOps)
    if (o.kind == k) return o;
  throw Error(ErrorKind::Contract, "unknown DSL operator kind");
}

const OpInfo* info_by_name(const std::string& name) {
  for (const auto& o : kOps)
    if (name == o.name) return &o;
  return nullptr;
}

[[noreturn]] void parse_fail(int line, int col, const std::string& msg) {
  throw Error(ErrorKind::Parse,
              "line " + std::to_string(line) + ", col " + std::to_string(col) +
                  ": " + msg);
}

// Scanner over one program line.
class LineScanner {
 public:
  LineScanner(const std::string& s, int line) : s_(s), line_(line) {}

  void skip_ws() {
    while (pos_ < s_.size() && (s_[pos_] == ' ' || s_[pos_] == '\t')) ++pos_;
  }
  bool at_end() {
    skip_ws();
    return pos_ >= s_.size();
  }
  char peek() {
    skip_ws();
    return pos_ < s_.size() ? s_[pos_] : '\0';
  }
  void expect(char c) {
    skip_ws();
    if (pos_ >= s_.size() || s_[pos_] != c)
      fail(std::string("expected '") + c + "'");
    ++pos_;
  }
  bool consume(char c) {
    skip_ws();
    if (pos_ < s_.size() && s_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }
  int integer() {
    skip_ws();
    size_t start = pos_;
    while (pos_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[pos_]))) ++pos_;
    if (pos_ == start) fail("expected a step number");
    return std::stoi(s_.substr(start, pos_ - start));
  }
  std::string token() {
    skip_ws();
    size_t start = pos_;
    while (pos_ < s_.size()) {
      char c = s_[pos_];
      if ((c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '_') ++pos_;
      else break;
    }
    if (pos_ == start) fail("expected a token");
    return s_.substr(start, pos_ - start);
  }
  std::string op_name() {
    skip_ws();
    size_t start = pos_;
    while (pos_ < s_.size() && std::isalnum(static_cast<unsigned char>(s_[pos_]))) ++pos_;
    if (pos_ == start) fail("expected an operator name");
    return s_.substr(start, pos_ - start);
  }
  [[noreturn]] void fail(const std::string& msg) {
    parse_fail(line_, static_cast<int>(pos_) + 1, msg);
  }

 private:
  const std::string& s_;
  int line_;
  size_t pos_ = 0;
};

ValKind out_kind(const DslStep& s) { return info_of(s.op).out; }

void check_roles_and_pairs(const DslStep& s, int line) {
  auto role_ok = [](const std::string& r) { return r == "subject" || r == "object"; };
  switch (s.op) {
    case DslOpKind::GRelate:
    case DslOpKind::GVerifyRel:
      if (!role_ok(s.args[2]))
        parse_fail(line, 1, "role must be 'subject' or 'object', got '" + s.args[2] + "'");
      break;
    case DslOpKind::GChooseRel:
      if (!role_ok(s.args[3]))
        parse_fail(line, 1, "role must be 'subject' or 'object', got '" + s.args[3] + "'");
      if (s.args[1] == s.args[2])
        parse_fail(line, 1, "GChooseRel candidates must differ");
      break;
    case DslOpKind::GChooseAttr:
      if (s.args[0] == s.args[1])
        parse_fail(line, 1, "GChooseAttr candidates must differ");
      break;
    default:
      break;
  }
}

}  // namespace

const char* dsl_op_name(DslOpKind k) { return info_of(k).name; }

bool DslProgram::open() const {
  return !steps.empty() && info_of(steps.back().op).out == ValKind::List;
}

DslProgram parse_dsl(const std::string& text) {
  DslProgram p;
  std::istringstream in(text);
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    if (!raw.empty() && raw.back() == '\r') raw.pop_back();
    bool blank = raw.find_first_not_of(" \t") == std::string::npos;
    if (blank) {
      if (p.steps.empty()) continue;
      parse_fail(line_no, 1, "blank line inside a program");
    }
    LineScanner sc(raw, line_no);
    sc.expect('#');
    int idx = sc.integer();
    if (idx != static_cast<int>(p.steps.size()))
      sc.fail("expected step #" + std::to_string(p.steps.size()));
    sc.expect('=');
    std::string name = sc.op_name();
    const OpInfo* op = info_by_name(name);
    if (!op) sc.fail("unknown operator '" + name + "'");

    DslStep step;
    step.op = op->kind;
    sc.expect('(');
    if (!sc.consume(')')) {
      step.args.push_back(sc.token());
      while (sc.consume(',')) step.args.push_back(sc.token());
      sc.expect(')');
    }
    if (sc.consume('[')) {
      do {
        sc.expect('#');
        step.inputs.push_back(sc.integer());
      } while (sc.consume(','));
      sc.expect(']');
    }
    if (!sc.at_end()) sc.fail("unexpected trailing text");

    if (static_cast<int>(step.args.size()) != op->args)
      parse_fail(line_no, 1,
                 std::string(op->name) + " takes " + std::to_string(op->args) +
                     " argument(s), got " + std::to_string(step.args.size()));
    if (static_cast<int>(step.inputs.size()) != op->inputs)
      parse_fail(line_no, 1,
                 std::string(op->name) + " takes " + std::to_string(op->inputs) +
                     " input step(s), got " + std::to_string(step.inputs.size()));
    for (int ref : step.inputs) {
      if (ref < 0 || ref >= idx)
        parse_fail(line_no, 1, "input #" + std::to_string(ref) + " is not an earlier step");
      ValKind got = out_kind(p.steps[ref]);
      if (got != op->in) {
        std::string want = op->in == ValKind::Scalar ? "terminal-scalar" : "attention";
        parse_fail(line_no, 1,
                   std::string(op->name) + " requires " + want + " inputs, " +
                       info_of(p.steps[ref].op).name +
                       (got == ValKind::List ? " is a candidate list" : " is not"));
      }
    }
    check_roles_and_pairs(step, line_no);
    p.steps.push_back(std::move(step));
  }

  if (p.steps.empty()) throw Error(ErrorKind::Parse, "empty program");
  const int last = p.length() - 1;
  for (int i = 0; i < p.length(); ++i) {
    if (info_of(p.steps[i].op).out == ValKind::List && i != last)
      parse_fail(i + 1, 1, std::string(info_of(p.steps[i].op).name) +
                               " must be the final step");
  }
  if (out_kind(p.steps[last]) == ValKind::Vec)
    parse_fail(last + 1, 1, "program is missing a terminal step");
  std::vector<bool> used(p.steps.size(), false);
  for (const auto& s : p.steps)
    for (int ref : s.inputs) used[ref] = true;
  for (int i = 0; i < last; ++i) {
    if (!used[i])
      parse_fail(i + 1, 1, "step #" + std::to_string(i) + " is never used");
  }
  return p;
}

std::string print_dsl(const DslProgram& p) {
  std::string out;
  for (int i = 0; i < p.length(); ++i) {
    const DslStep& s = p.steps[i];
    if (i) out += "\n";
    out += "#" + std::to_string(i) + " = " + dsl_op_name(s.op) + "(";
    for (size_t a = 0; a < s.args.size(); ++a) {
      if (a) out += ",";
      out += s.args[a];
    }
    out += ")";
    if (!s.inputs.empty()) {
      out += " [";
      for (size_t r = 0; r < s.inputs.size(); ++r) {
        if (r) out += ",";
        out += "#" + std::to_string(s.inputs[r]);
      }
      out += "]";
    }
  }
  return out;
}

namespace {

[[noreturn]] void vocab_fail(int step, const std::string& msg) {
  throw Error(ErrorKind::Vocab, "step #" + std::to_string(step) + ": " + msg);
}

void need_unary(const ConceptVocabulary& v, int step, const std::string& tok) {
  if (!v.has_unary(tok)) vocab_fail(step, "unknown concept '" + tok + "'");
}
void need_binary(const ConceptVocabulary& v, int step, const std::string& tok) {
  if (!v.has_binary(tok)) vocab_fail(step, "unknown relation '" + tok + "'");
}
void need_category(const ConceptVocabulary& v, int step, const std::string& tok) {
  if (!v.has_category(tok)) vocab_fail(step, "unknown category '" + tok + "'");
}

}  // namespace

void check_against_vocab(const DslProgram& p, const ConceptVocabulary& vocab) {
  for (int i = 0; i < p.length(); ++i) {
    const DslStep& s = p.steps[i];
    switch (s.op) {
      case DslOpKind::GSelect:
      case DslOpKind::GFilter:
      case DslOpKind::GVerifyAttr:
        need_unary(vocab, i, s.args[0]);
        break;
      case DslOpKind::GChooseAttr:
        need_unary(vocab, i, s.args[0]);
        need_unary(vocab, i, s.args[1]);
        break;
      case DslOpKind::GRelate:
      case DslOpKind::GVerifyRel:
        need_unary(vocab, i, s.args[0]);
        need_binary(vocab, i, s.args[1]);
        break;
      case DslOpKind::GChooseRel:
        need_unary(vocab, i, s.args[0]);
        need_binary(vocab, i, s.args[1]);
        need_binary(vocab, i, s.args[2]);
        break;
      case DslOpKind::GQuery:
      case DslOpKind::GTwoSame:
      case DslOpKind::GTwoDifferent:
      case DslOpKind::GAllSame:
        need_category(vocab, i, s.args[0]);
        break;
      case DslOpKind::GExists:
      case DslOpKind::GAnd:
      case DslOpKind::GOr:
        break;
    }
  }
}

namespace {

// The DSL role names the slot the *input* variable fills; the engine's
// Relate role orients the matrix for the *output* variable. Flip.
Role engine_role(const std::string& dsl_role) {
  return parse_role(dsl_role) == Role::Subject ? Role::Object : Role::Subject;
}

class Lowering {
 public:
  Lowering(const DslProgram& p, const ConceptVocabulary& vocab)
      : p_(p), vocab_(vocab), val_(p.steps.size(), -1) {}

  DfolProgram run() {
    for (int i = 0; i < p_.length(); ++i) lower_step(i);
    validate_program(out_);
    return std::move(out_);
  }

 private:
  int emit(DfolOpKind kind, std::vector<int> inputs,
           std::vector<std::string> concepts = {}, Role role = Role::Subject,
           Quantifier q = Quantifier::Exists) {
    DfolStep s;
    s.kind = kind;
    s.inputs = std::move(inputs);
    s.concepts = std::move(concepts);
    s.role = role;
    s.quant = q;
    out_.steps.push_back(std::move(s));
    return static_cast<int>(out_.steps.size()) - 1;
  }

  int filter(int in, const std::string& token) {
    return emit(DfolOpKind::Filter, {in}, {token});
  }
  int relate(int in, const std::string& rel, const std::string& dsl_role) {
    return emit(DfolOpKind::Relate, {in}, {rel}, engine_role(dsl_role));
  }
  int exists(int in) {
    return emit(DfolOpKind::Aggregate, {in}, {}, Role::Subject, Quantifier::Exists);
  }

  void lower_step(int i) {
    const DslStep& s = p_.steps[i];
    auto in = [&](size_t k) { return val_[s.inputs[k]]; };
    switch (s.op) {
      case DslOpKind::GSelect:
        val_[i] = filter(emit(DfolOpKind::One, {}), s.args[0]);
        break;
      case DslOpKind::GFilter:
        val_[i] = filter(in(0), s.args[0]);
        break;
      case DslOpKind::GRelate:
        val_[i] = filter(relate(in(0), s.args[1], s.args[2]), s.args[0]);
        break;
      case DslOpKind::GVerifyAttr:
        val_[i] = exists(filter(in(0), s.args[0]));
        break;
      case DslOpKind::GVerifyRel:
        val_[i] = exists(filter(relate(in(0), s.args[1], s.args[2]), s.args[0]));
        break;
      case DslOpKind::GExists:
        val_[i] = exists(in(0));
        break;
      case DslOpKind::GAnd:
        val_[i] = emit(DfolOpKind::ScalarAnd, {in(0), in(1)});
        break;
      case DslOpKind::GOr:
        val_[i] = emit(DfolOpKind::ScalarOr, {in(0), in(1)});
        break;
      case DslOpKind::GQuery: {
        query_list(vocab_.concepts_of(s.args[0]), in(0));
        break;
      }
      case DslOpKind::GChooseAttr: {
        query_list({s.args[0], s.args[1]}, in(0));
        break;
      }
      case DslOpKind::GChooseRel: {
        std::vector<int> scalars;
        for (int k = 1; k <= 2; ++k)
          scalars.push_back(
              exists(filter(relate(in(0), s.args[k], s.args[3]), s.args[0])));
        emit(DfolOpKind::QueryList, std::move(scalars), {s.args[1], s.args[2]});
        break;
      }
      case DslOpKind::GTwoSame:
        val_[i] = two_same(in(0), in(1), s.args[0]);
        break;
      case DslOpKind::GTwoDifferent:
        val_[i] = emit(DfolOpKind::ScalarNot, {two_same(in(0), in(1), s.args[0])});
        break;
      case DslOpKind::GAllSame: {
        int acc = -1;
        for (const auto& c : vocab_.concepts_of(s.args[0])) {
          int nf = emit(DfolOpKind::Neg, {filter(in(0), c)});
          int sc = exists(emit(DfolOpKind::VecAnd, {in(0), nf}));
          acc = acc < 0 ? sc : emit(DfolOpKind::ScalarAnd, {acc, sc});
        }
        val_[i] = emit(DfolOpKind::ScalarNot, {acc});
        break;
      }
    }
  }

  void query_list(const std::vector<std::string>& tokens, int in) {
    std::vector<int> scalars;
    scalars.reserve(tokens.size());
    for (const auto& c : tokens) scalars.push_back(exists(filter(in, c)));
    emit(DfolOpKind::QueryList, std::move(scalars), tokens);
  }

  int two_same(int x, int y, const std::string& category) {
    int acc = -1;
    for (const auto& c : vocab_.concepts_of(category)) {
      int tc = emit(DfolOpKind::ScalarAnd,
                    {exists(filter(x, c)), exists(filter(y, c))});
      acc = acc < 0 ? tc : emit(DfolOpKind::ScalarOr, {acc, tc});
    }
    return acc;
  }

  const DslProgram& p_;
  const ConceptVocabulary& vocab_;
  std::vector<int> val_;
  DfolProgram out_;
};

}  // namespace

DfolProgram compile_dsl(const DslProgram& p, const ConceptVocabulary& vocab) {
  check_against_vocab(p, vocab);
  return Lowering(p, vocab).run();
}

namespace {

struct OpenBranch {
  FormulaPtr f;      // one free variable
  std::string var;
};

class FormulaBuilder {
 public:
  FormulaBuilder(const DslProgram& p, const ConceptVocabulary& vocab)
      : p_(p), vocab_(vocab), branch_(p.steps.size()), scalar_(p.steps.size()) {}

  std::vector<FormulaPtr> run() {
    for (int i = 0; i < p_.length(); ++i) build_step(i);
    return std::move(result_);
  }

 private:
  std::string fresh() { return "X" + std::to_string(var_counter_++); }

  // DSL role: the slot the input variable fills in the relation.
  FormulaPtr rel_atom(const std::string& rel, const std::string& in_var,
                      const std::string& out_var, const std::string& dsl_role) {
    return parse_role(dsl_role) == Role::Subject ? make_rel(rel, in_var, out_var)
                                                 : make_rel(rel, out_var, in_var);
  }

  // Relate then Filter(name): attention over a fresh variable.
  OpenBranch relate_branch(const OpenBranch& b, const std::string& name,
                           const std::string& rel, const std::string& dsl_role) {
    std::string w = fresh();
    FormulaPtr inner = make_quant(
        Quantifier::Exists, b.var,
        make_and(rel_atom(rel, b.var, w, dsl_role), b.f));
    return {make_and(make_atom(name, w), inner), w};
  }

  FormulaPtr exists_close(const OpenBranch& b) {
    return make_quant(Quantifier::Exists, b.var, b.f);
  }
  FormulaPtr exists_filtered(const OpenBranch& b, const std::string& token) {
    return make_quant(Quantifier::Exists, b.var,
                      make_and(make_atom(token, b.var), b.f));
  }

  void build_step(int i) {
    const DslStep& s = p_.steps[i];
    auto bin = [&](size_t k) -> const OpenBranch& { return branch_[s.inputs[k]]; };
    auto sin = [&](size_t k) { return scalar_[s.inputs[k]]; };
    switch (s.op) {
      case DslOpKind::GSelect: {
        std::string v = fresh();
        branch_[i] = {make_atom(s.args[0], v), v};
        break;
      }
      case DslOpKind::GFilter:
        branch_[i] = {make_and(make_atom(s.args[0], bin(0).var), bin(0).f),
                      bin(0).var};
        break;
      case DslOpKind::GRelate:
        branch_[i] = relate_branch(bin(0), s.args[0], s.args[1], s.args[2]);
        break;
      case DslOpKind::GVerifyAttr:
        scalar_[i] = exists_filtered(bin(0), s.args[0]);
        break;
      case DslOpKind::GVerifyRel:
        scalar_[i] =
            exists_close(relate_branch(bin(0), s.args[0], s.args[1], s.args[2]));
        break;
      case DslOpKind::GExists:
        scalar_[i] = exists_close(bin(0));
        break;
      case DslOpKind::GAnd:
        scalar_[i] = make_and(sin(0), sin(1));
        break;
      case DslOpKind::GOr:
        scalar_[i] = make_or(sin(0), sin(1));
        break;
      case DslOpKind::GQuery:
        for (const auto& c : vocab_.concepts_of(s.args[0]))
          result_.push_back(exists_filtered(bin(0), c));
        break;
      case DslOpKind::GChooseAttr:
        result_.push_back(exists_filtered(bin(0), s.args[0]));
        result_.push_back(exists_filtered(bin(0), s.args[1]));
        break;
      case DslOpKind::GChooseRel:
        for (int k = 1; k <= 2; ++k)
          result_.push_back(exists_close(
              relate_branch(bin(0), s.args[0], s.args[k], s.args[3])));
        break;
      case DslOpKind::GTwoSame:
        scalar_[i] = two_same(bin(0), bin(1), s.args[0]);
        break;
      case DslOpKind::GTwoDifferent:
        scalar_[i] = make_not(two_same(bin(0), bin(1), s.args[0]));
        break;
      case DslOpKind::GAllSame: {
        FormulaPtr acc;
        for (const auto& c : vocab_.concepts_of(s.args[0])) {
          FormulaPtr lacks = make_quant(
              Quantifier::Exists, bin(0).var,
              make_and(bin(0).f,
                       make_not(make_and(make_atom(c, bin(0).var), bin(0).f))));
          acc = acc ? make_and(acc, lacks) : lacks;
        }
        scalar_[i] = make_not(acc);
        break;
      }
    }
    if (i == p_.length() - 1 && scalar_[i]) result_.push_back(scalar_[i]);
  }

  FormulaPtr two_same(const OpenBranch& x, const OpenBranch& y,
                      const std::string& category) {
    FormulaPtr acc;
    for (const auto& c : vocab_.concepts_of(category)) {
      FormulaPtr tc = make_and(exists_filtered(x, c), exists_filtered(y, c));
      acc = acc ? make_or(acc, tc) : tc;
    }
    return acc;
  }

  const DslProgram& p_;
  const ConceptVocabulary& vocab_;
  std::vector<OpenBranch> branch_;
  std::vector<FormulaPtr> scalar_;
  std::vector<FormulaPtr> result_;
  int var_counter_ = 0;
};

}  // namespace

std::vector<FormulaPtr> to_formulas(const DslProgram& p, const ConceptVocabulary& vocab) {
  check_against_vocab(p, vocab);
  return FormulaBuilder(p, vocab).run();
}

std::vector<std::string> candidate_tokens(const DslProgram& p,
                                          const ConceptVocabulary& vocab) {
  if (p.steps.empty()) return {};
  const DslStep& s = p.steps.back();
  switch (s.op) {
    case DslOpKind::GQuery:
      check_against_vocab(p, vocab);
      return vocab.concepts_of(s.args[0]);
    case DslOpKind::GChooseAttr:
      return {s.args[0], s.args[1]};
    case DslOpKind::GChooseRel:
      return {s.args[1], s.args[2]};
    default:
      return {};
  }
}

}  // namespace nfol
