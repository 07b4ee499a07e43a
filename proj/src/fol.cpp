#include "nfol/fol.hpp"

#include <cctype>
#include <sstream>

#include "nfol/error.hpp"

namespace nfol {

const char* quantifier_name(Quantifier q) {
  switch (q) {
    case Quantifier::Exists: return "exists";
    case Quantifier::ForAll: return "forall";
    case Quantifier::NotExists: return "nexists";
  }
  return "?";
}

FormulaPtr make_atom(std::string pred, std::string var) {
  auto f = std::make_shared<Formula>();
  f->kind = Formula::Kind::Atom;
  f->pred = std::move(pred);
  f->var_a = std::move(var);
  return f;
}

FormulaPtr make_rel(std::string pred, std::string subject_var, std::string object_var) {
  auto f = std::make_shared<Formula>();
  f->kind = Formula::Kind::RelAtom;
  f->pred = std::move(pred);
  f->var_a = std::move(subject_var);
  f->var_b = std::move(object_var);
  return f;
}

FormulaPtr make_not(FormulaPtr inner) {
  auto f = std::make_shared<Formula>();
  f->kind = Formula::Kind::Not;
  f->left = std::move(inner);
  return f;
}

FormulaPtr make_and(FormulaPtr a, FormulaPtr b) {
  auto f = std::make_shared<Formula>();
  f->kind = Formula::Kind::And;
  f->left = std::move(a);
  f->right = std::move(b);
  return f;
}

FormulaPtr make_or(FormulaPtr a, FormulaPtr b) {
  auto f = std::make_shared<Formula>();
  f->kind = Formula::Kind::Or;
  f->left = std::move(a);
  f->right = std::move(b);
  return f;
}

FormulaPtr make_quant(Quantifier q, std::string var, FormulaPtr body) {
  auto f = std::make_shared<Formula>();
  f->kind = Formula::Kind::Quant;
  f->q = q;
  f->var_a = std::move(var);
  f->left = std::move(body);
  return f;
}

bool formula_equal(const Formula& a, const Formula& b) {
  if (a.kind != b.kind || a.pred != b.pred || a.var_a != b.var_a || a.var_b != b.var_b)
    return false;
  if (a.kind == Formula::Kind::Quant && a.q != b.q) return false;
  if ((a.left == nullptr) != (b.left == nullptr)) return false;
  if ((a.right == nullptr) != (b.right == nullptr)) return false;
  if (a.left && !formula_equal(*a.left, *b.left)) return false;
  if (a.right && !formula_equal(*a.right, *b.right)) return false;
  return true;
}

namespace {

void free_vars_rec(const Formula& f, std::set<std::string>& bound,
                   std::set<std::string>& out) {
  switch (f.kind) {
    case Formula::Kind::Atom:
      if (!bound.count(f.var_a)) out.insert(f.var_a);
      break;
    case Formula::Kind::RelAtom:
      if (!bound.count(f.var_a)) out.insert(f.var_a);
      if (!bound.count(f.var_b)) out.insert(f.var_b);
      break;
    case Formula::Kind::Not:
      free_vars_rec(*f.left, bound, out);
      break;
    case Formula::Kind::And:
    case Formula::Kind::Or:
      free_vars_rec(*f.left, bound, out);
      free_vars_rec(*f.right, bound, out);
      break;
    case Formula::Kind::Quant: {
      const bool fresh = bound.insert(f.var_a).second;
      free_vars_rec(*f.left, bound, out);
      if (fresh) bound.erase(f.var_a);
      break;
    }
  }
}

void relation_partners(const Formula& f, const std::string& var,
                       std::set<std::string>& out) {
  switch (f.kind) {
    case Formula::Kind::Atom:
      break;
    case Formula::Kind::RelAtom:
      if (f.var_a == var && f.var_b != var) out.insert(f.var_b);
      if (f.var_b == var && f.var_a != var) out.insert(f.var_a);
      break;
    case Formula::Kind::Not:
      relation_partners(*f.left, var, out);
      break;
    case Formula::Kind::And:
    case Formula::Kind::Or:
      relation_partners(*f.left, var, out);
      relation_partners(*f.right, var, out);
      break;
    case Formula::Kind::Quant:
      if (f.var_a == var) return;  // shadowed
      relation_partners(*f.left, var, out);
      break;
  }
}

[[noreturn]] void unbound(const std::string& var) {
  throw Error(ErrorKind::Formula, "unbound variable: " + var);
}

}  // namespace

std::set<std::string> free_variables(const Formula& f) {
  std::set<std::string> bound, out;
  free_vars_rec(f, bound, out);
  return out;
}

std::set<int> quantifier_exclusions(const Formula& body, const std::string& var,
                                    const std::map<std::string, int>& env) {
  std::set<std::string> partners;
  relation_partners(body, var, partners);
  std::set<int> out;
  for (const std::string& w : partners) {
    auto it = env.find(w);
    if (it != env.end()) out.insert(it->second);
  }
  return out;
}

// ------------------------------------------------------------ evaluation --

namespace {

bool crisp_rec(const Formula& f, int n, const AtomDecider& decider,
               std::map<std::string, int>& env) {
  switch (f.kind) {
    case Formula::Kind::Atom: {
      auto it = env.find(f.var_a);
      if (it == env.end()) unbound(f.var_a);
      return decider(f.pred, it->second, -1);
    }
    case Formula::Kind::RelAtom: {
      auto a = env.find(f.var_a), b = env.find(f.var_b);
      if (a == env.end()) unbound(f.var_a);
      if (b == env.end()) unbound(f.var_b);
      return decider(f.pred, a->second, b->second);
    }
    case Formula::Kind::Not:
      return !crisp_rec(*f.left, n, decider, env);
    case Formula::Kind::And:
      return crisp_rec(*f.left, n, decider, env) && crisp_rec(*f.right, n, decider, env);
    case Formula::Kind::Or:
      return crisp_rec(*f.left, n, decider, env) || crisp_rec(*f.right, n, decider, env);
    case Formula::Kind::Quant: {
      const std::set<int> excluded = quantifier_exclusions(*f.left, f.var_a, env);
      bool any = false, all = true;
      for (int i = 0; i < n; ++i) {
        if (excluded.count(i)) continue;
        env[f.var_a] = i;
        const bool v = crisp_rec(*f.left, n, decider, env);
        env.erase(f.var_a);
        any |= v;
        all &= v;
      }
      switch (f.q) {
        case Quantifier::Exists: return any;
        case Quantifier::ForAll: return all;     // vacuously true on empty range
        case Quantifier::NotExists: return !any;
      }
      return false;
    }
  }
  return false;
}

double product_rec(const Formula& f, int n, const AtomProb& prob,
                   std::map<std::string, int>& env) {
  switch (f.kind) {
    case Formula::Kind::Atom: {
      auto it = env.find(f.var_a);
      if (it == env.end()) unbound(f.var_a);
      return prob(f.pred, it->second, -1);
    }
    case Formula::Kind::RelAtom: {
      auto a = env.find(f.var_a), b = env.find(f.var_b);
      if (a == env.end()) unbound(f.var_a);
      if (b == env.end()) unbound(f.var_b);
      return prob(f.pred, a->second, b->second);
    }
    case Formula::Kind::Not:
      return 1.0 - product_rec(*f.left, n, prob, env);
    case Formula::Kind::And:
      return product_rec(*f.left, n, prob, env) * product_rec(*f.right, n, prob, env);
    case Formula::Kind::Or: {
      const double x = product_rec(*f.left, n, prob, env);
      const double y = product_rec(*f.right, n, prob, env);
      return 1.0 - (1.0 - x) * (1.0 - y);
    }
    case Formula::Kind::Quant: {
      const std::set<int> excluded = quantifier_exclusions(*f.left, f.var_a, env);
      // forall: prod a_i; exists: 1 - prod (1-a_i); nexists: prod (1-a_i).
      double p = 1.0;
      for (int i = 0; i < n; ++i) {
        if (excluded.count(i)) continue;
        env[f.var_a] = i;
        const double v = product_rec(*f.left, n, prob, env);
        env.erase(f.var_a);
        p *= (f.q == Quantifier::ForAll) ? v : (1.0 - v);
      }
      switch (f.q) {
        case Quantifier::Exists: return 1.0 - p;
        case Quantifier::ForAll: return p;
        case Quantifier::NotExists: return p;
      }
      return 0.0;
    }
  }
  return 0.0;
}

void require_closed(const Formula& f) {
  const auto fv = free_variables(f);
  if (!fv.empty())
    throw Error(ErrorKind::Formula, "formula is not closed; free variable: " + *fv.begin());
}

}  // namespace

bool crisp_eval_with(const Formula& f, int n_objects, const AtomDecider& decider) {
  require_closed(f);
  std::map<std::string, int> env;
  return crisp_rec(f, n_objects, decider, env);
}

bool crisp_eval(const Formula& f, const SceneGraph& scene, const ConceptVocabulary& vocab) {
  return crisp_eval_with(f, scene.size(), [&](const std::string& pred, int i, int j) {
    if (j < 0) {
      if (!vocab.has_unary(pred)) throw Error(ErrorKind::Vocab, "unknown concept: " + pred);
      const SceneObject& obj = scene.objects[i];
      if (obj.name == pred) return true;
      for (const std::string& a : obj.attributes)
        if (a == pred) return true;
      return false;
    }
    if (!vocab.has_binary(pred)) throw Error(ErrorKind::Vocab, "unknown relation: " + pred);
    return scene.has_relation(i, pred, j);
  });
}

double product_semantics_eval(const Formula& f, int n_objects, const AtomProb& prob) {
  require_closed(f);
  std::map<std::string, int> env;
  return product_rec(f, n_objects, prob, env);
}

// ------------------------------------------------- expectation semantics --

namespace {

void collect_rec(const Formula& f, int n, std::map<std::string, int>& env,
                 std::set<GroundAtom>& out) {
  switch (f.kind) {
    case Formula::Kind::Atom: {
      auto it = env.find(f.var_a);
      if (it == env.end()) unbound(f.var_a);
      out.insert({f.pred, it->second, -1});
      break;
    }
    case Formula::Kind::RelAtom: {
      auto a = env.find(f.var_a), b = env.find(f.var_b);
      if (a == env.end()) unbound(f.var_a);
      if (b == env.end()) unbound(f.var_b);
      out.insert({f.pred, a->second, b->second});
      break;
    }
    case Formula::Kind::Not:
      collect_rec(*f.left, n, env, out);
      break;
    case Formula::Kind::And:
    case Formula::Kind::Or:
      collect_rec(*f.left, n, env, out);
      collect_rec(*f.right, n, env, out);
      break;
    case Formula::Kind::Quant: {
      const std::set<int> excluded = quantifier_exclusions(*f.left, f.var_a, env);
      for (int i = 0; i < n; ++i) {
        if (excluded.count(i)) continue;
        env[f.var_a] = i;
        collect_rec(*f.left, n, env, out);
        env.erase(f.var_a);
      }
      break;
    }
  }
}

}  // namespace

std::set<GroundAtom> collect_ground_atoms(const Formula& f, int n_objects) {
  require_closed(f);
  std::map<std::string, int> env;
  std::set<GroundAtom> out;
  collect_rec(f, n_objects, env, out);
  return out;
}

double atom_expectation_eval(const Formula& f, int n_objects,
                             const std::map<GroundAtom, double>& probs) {
  const std::set<GroundAtom> atom_set = collect_ground_atoms(f, n_objects);
  const std::vector<GroundAtom> atoms(atom_set.begin(), atom_set.end());
  const size_t k = atoms.size();
  if (k > 20)
    throw Error(ErrorKind::Capacity,
                "atom_expectation_eval: " + std::to_string(k) + " ground atoms (limit 20)");
  std::vector<double> p(k);
  for (size_t a = 0; a < k; ++a) {
    auto it = probs.find(atoms[a]);
    if (it == probs.end())
      throw Error(ErrorKind::Contract,
                  "atom_expectation_eval: missing probability for ground atom " + atoms[a].pred);
    p[a] = it->second;
  }
  std::map<GroundAtom, size_t> index;
  for (size_t a = 0; a < k; ++a) index[atoms[a]] = a;

  double expectation = 0.0;
  const uint64_t worlds = 1ull << k;
  for (uint64_t mask = 0; mask < worlds; ++mask) {
    double weight = 1.0;
    for (size_t a = 0; a < k; ++a) weight *= (mask >> a) & 1 ? p[a] : 1.0 - p[a];
    if (weight == 0.0) continue;
    const bool truth = crisp_eval_with(f, n_objects, [&](const std::string& pred, int i, int j) {
      auto it = index.find({pred, i, j});
      if (it == index.end())
        throw Error(ErrorKind::Contract, "atom_expectation_eval: unseen ground atom");
      return ((mask >> it->second) & 1) != 0;
    });
    if (truth) expectation += weight;
  }
  return expectation;
}

// ----------------------------------------------------------- text format --

namespace {

struct SexprParser {
  const std::string& text;
  size_t at = 0;

  explicit SexprParser(const std::string& t) : text(t) {}

  [[noreturn]] void fail(const std::string& msg) const {
    throw Error(ErrorKind::Parse,
                "formula: " + msg + " at offset " + std::to_string(at));
  }

  void skip_ws() {
    while (at < text.size() && std::isspace(static_cast<unsigned char>(text[at]))) ++at;
  }

  void expect(char c) {
    skip_ws();
    if (at >= text.size() || text[at] != c) fail(std::string("expected '") + c + "'");
    ++at;
  }

  std::string symbol() {
    skip_ws();
    const size_t start = at;
    while (at < text.size() &&
           (std::isalnum(static_cast<unsigned char>(text[at])) || text[at] == '_'))
      ++at;
    if (at == start) fail("expected a symbol");
    return text.substr(start, at - start);
  }

  FormulaPtr parse() {
    expect('(');
    const std::string head = symbol();
    FormulaPtr out;
    if (head == "atom") {
      std::string pred = symbol(), var = symbol();
      out = make_atom(std::move(pred), std::move(var));
    } else if (head == "rel") {
      std::string pred = symbol(), a = symbol(), b = symbol();
      out = make_rel(std::move(pred), std::move(a), std::move(b));
    } else if (head == "not") {
      out = make_not(parse());
    } else if (head == "and" || head == "or") {
      FormulaPtr l = parse(), r = parse();
      out = head == "and" ? make_and(std::move(l), std::move(r))
                          : make_or(std::move(l), std::move(r));
    } else if (head == "exists" || head == "forall" || head == "nexists") {
      std::string var = symbol();
      FormulaPtr body = parse();
      const Quantifier q = head == "exists"   ? Quantifier::Exists
                           : head == "forall" ? Quantifier::ForAll
                                              : Quantifier::NotExists;
      out = make_quant(q, std::move(var), std::move(body));
    } else {
      fail("unknown operator '" + head + "'");
    }
    expect(')');
    return out;
  }
};

}  // namespace

FormulaPtr parse_formula(const std::string& text) {
  SexprParser p(text);
  FormulaPtr f = p.parse();
  p.skip_ws();
  if (p.at != text.size()) p.fail("trailing input");
  return f;
}

std::string print_formula(const Formula& f) {
  std::ostringstream os;
  switch (f.kind) {
    case Formula::Kind::Atom:
      os << "(atom " << f.pred << " " << f.var_a << ")";
      break;
    case Formula::Kind::RelAtom:
      os << "(rel " << f.pred << " " << f.var_a << " " << f.var_b << ")";
      break;
    case Formula::Kind::Not:
      os << "(not " << print_formula(*f.left) << ")";
      break;
    case Formula::Kind::And:
      os << "(and " << print_formula(*f.left) << " " << print_formula(*f.right) << ")";
      break;
    case Formula::Kind::Or:
      os << "(or " << print_formula(*f.left) << " " << print_formula(*f.right) << ")";
      break;
    case Formula::Kind::Quant:
      os << "(" << quantifier_name(f.q) << " " << f.var_a << " " << print_formula(*f.left)
         << ")";
      break;
  }
  return os.str();
}

}  // namespace nfol
