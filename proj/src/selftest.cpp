#include "nfol/selftest.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "nfol/autodiff.hpp"
#include "nfol/calibration.hpp"
#include "nfol/dsl.hpp"
#include "nfol/engine.hpp"
#include "nfol/error.hpp"
#include "nfol/fol.hpp"
#include "nfol/harness.hpp"
#include "nfol/oracle.hpp"
#include "nfol/scene.hpp"
#include "nfol/vocab.hpp"

namespace nfol {
namespace {

constexpr double kFdStep = 1e-5;
constexpr double kGradTol = 1e-4;
constexpr double kMatchTol = 1e-9;

double u01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

size_t pick(std::mt19937_64& rng, size_t n) {
  return static_cast<size_t>(rng() % n);
}

bool coin(std::mt19937_64& rng) { return (rng() & 1) != 0; }

template <typename T>
const T& choice(const std::vector<T>& v, std::mt19937_64& rng) {
  return v[pick(rng, v.size())];
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

void fail(SuiteResult& r, std::string text) {
  ++r.failures;
  if (r.notes.size() < 8) r.notes.push_back(std::move(text));
}

}  // namespace

SuiteResult selftest_crisp_soundness(int scenes, int qps, uint64_t seed) {
  SuiteResult r;
  r.name = "crisp-soundness";
  GenConfig cfg;
  cfg.seed = seed;
  cfg.scenes = scenes;
  cfg.questions_per_scene = qps;
  const Dataset d = generate(cfg);
  for (const auto& q : d.questions) {
    GoldenOracle oracle(d.scene_of(q), d.vocab);
    const Answer a = answer(q.compiled, oracle);
    ++r.checks;
    if (a.text != q.gold)
      fail(r, q.id + ": golden answer '" + a.text + "' vs gold '" + q.gold + "'");
  }
  r.notes.push_back(std::to_string(r.checks) + " questions over " +
                    std::to_string(d.scenes.size()) + " scenes");
  return r;
}

SuiteResult selftest_engine_reference(int min_evals, uint64_t seed) {
  SuiteResult r;
  r.name = "engine-reference";
  std::mt19937_64 rng(seed * 0x9e3779b97f4a7c15ULL + 1);
  double max_diff = 0.0;
  int evals = 0;
  for (int round = 0; evals < min_evals && round < 64; ++round) {
    GenConfig cfg;
    cfg.seed = seed + static_cast<uint64_t>(round) * 101;
    cfg.scenes = std::max(1, min_evals / 4);
    cfg.questions_per_scene = 4;
    const Dataset d = generate(cfg);
    for (const auto& q : d.questions) {
      if (evals >= min_evals) break;
      AtomTableOracle table(d.vocab, d.scene_of(q).size());
      table.fill_random(rng());
      Tape tape;
      const EngineOutput out = execute(q.compiled, table, tape);
      ++evals;
      if (out.open) {
        ++r.checks;
        if (out.candidates != q.candidates) {
          fail(r, q.id + ": candidate tokens diverge from the formula reading");
          continue;
        }
        for (size_t k = 0; k < q.formulas.size(); ++k) {
          const double ref = reference_eval(q.formulas[k], table);
          const double diff =
              std::abs(out.candidate_values[k].value.scalar_value() - ref);
          max_diff = std::max(max_diff, diff);
          ++r.checks;
          if (!(diff <= kMatchTol))
            fail(r, q.id + "#" + std::to_string(k) + ": |engine-ref| = " + fmt(diff));
        }
      } else {
        const double ref = reference_eval(q.formulas[0], table);
        const double diff = std::abs(out.terminal.value.scalar_value() - ref);
        max_diff = std::max(max_diff, diff);
        ++r.checks;
        if (!(diff <= kMatchTol)) fail(r, q.id + ": |engine-ref| = " + fmt(diff));
      }
    }
  }
  r.notes.push_back(std::to_string(evals) + " soft evaluations, max |engine-ref| = " +
                    fmt(max_diff));
  return r;
}

namespace {

// The exactness regime: no relations, no cross-attention ops, and no ground
// atom read twice, so the independence assumption behind the product
// semantics holds with equality.
bool single_variable_ops(const DslProgram& p) {
  for (const auto& s : p.steps) {
    switch (s.op) {
      case DslOpKind::GRelate:
      case DslOpKind::GVerifyRel:
      case DslOpKind::GChooseRel:
      case DslOpKind::GTwoSame:
      case DslOpKind::GTwoDifferent:
      case DslOpKind::GAllSame:
        return false;
      default:
        break;
    }
  }
  return true;
}

void count_atom_preds(const Formula& f, std::map<std::string, int>& out) {
  switch (f.kind) {
    case Formula::Kind::Atom:
    case Formula::Kind::RelAtom:
      ++out[f.pred];
      break;
    case Formula::Kind::Not:
    case Formula::Kind::Quant:
      count_atom_preds(*f.left, out);
      break;
    case Formula::Kind::And:
    case Formula::Kind::Or:
      count_atom_preds(*f.left, out);
      count_atom_preds(*f.right, out);
      break;
  }
}

bool no_repeated_atoms(const Formula& f) {
  std::map<std::string, int> counts;
  count_atom_preds(f, counts);
  for (const auto& [pred, c] : counts)
    if (c > 1) return false;
  return true;
}

}  // namespace

SuiteResult selftest_single_variable(int min_evals, uint64_t seed) {
  SuiteResult r;
  r.name = "single-variable";
  std::mt19937_64 rng(seed * 0x9e3779b97f4a7c15ULL + 2);
  double max_diff = 0.0;
  int evals = 0;
  for (int round = 0; evals < min_evals && round < 64; ++round) {
    GenConfig cfg;
    cfg.seed = seed + static_cast<uint64_t>(round) * 103;
    cfg.scenes = std::max(1, min_evals / 2);
    cfg.questions_per_scene = 5;
    cfg.max_objects = 6;  // keeps the joint enumeration at 2^12 outcomes
    const Dataset d = generate(cfg);
    for (const auto& q : d.questions) {
      if (evals >= min_evals) break;
      if (!single_variable_ops(q.program)) continue;
      const int n = d.scene_of(q).size();
      AtomTableOracle table(d.vocab, n);
      table.fill_random(rng());
      const auto probs = table.atom_probs();
      Tape tape;
      const EngineOutput out = execute(q.compiled, table, tape);
      bool counted = false;
      for (size_t k = 0; k < q.formulas.size(); ++k) {
        if (!no_repeated_atoms(*q.formulas[k])) continue;
        const double want = atom_expectation_eval(*q.formulas[k], n, probs);
        const double got = out.open ? out.candidate_values[k].value.scalar_value()
                                    : out.terminal.value.scalar_value();
        const double diff = std::abs(got - want);
        max_diff = std::max(max_diff, diff);
        ++r.checks;
        counted = true;
        if (!(diff <= kMatchTol))
          fail(r, q.id + "#" + std::to_string(k) + ": |engine-expectation| = " + fmt(diff));
      }
      if (counted) ++evals;
    }
  }
  r.notes.push_back(std::to_string(evals) + " programs, max |engine-expectation| = " +
                    fmt(max_diff));
  return r;
}

namespace {

using BuildFn = std::function<DiffValue(Tape&, const std::vector<DiffValue>&)>;

// Tape gradients of a scalar-valued builder vs central differences over every
// element of every input tensor.
double max_rel_grad_err(const std::vector<Tensor>& inputs, const BuildFn& f) {
  Tape t;
  std::vector<DiffValue> xs;
  xs.reserve(inputs.size());
  for (const auto& in : inputs) xs.push_back(t.leaf(in));
  const DiffValue y = f(t, xs);
  const std::vector<Tensor> grads = t.backward(y);
  double worst = 0.0;
  for (size_t k = 0; k < inputs.size(); ++k) {
    for (int e = 0; e < inputs[k].size(); ++e) {
      auto eval_at = [&](double delta) {
        Tape t2;
        std::vector<DiffValue> ys;
        ys.reserve(inputs.size());
        for (size_t m = 0; m < inputs.size(); ++m) {
          Tensor v = inputs[m];
          if (m == k) v[e] += delta;
          ys.push_back(t2.leaf(v));
        }
        return f(t2, ys).value.scalar_value();
      };
      const double fd = (eval_at(kFdStep) - eval_at(-kFdStep)) / (2.0 * kFdStep);
      const double analytic = grads[static_cast<size_t>(xs[k].id)][e];
      worst = std::max(worst, std::abs(analytic - fd) / (std::abs(fd) + 1e-8));
    }
  }
  return worst;
}

}  // namespace

SuiteResult selftest_gradcheck_ops(uint64_t seed) {
  SuiteResult r;
  r.name = "gradcheck-ops";
  std::mt19937_64 rng(seed * 0x9e3779b97f4a7c15ULL + 3);
  auto rvec = [&](int n, double lo, double hi) {
    std::vector<double> v(static_cast<size_t>(n));
    for (auto& x : v) x = lo + (hi - lo) * u01(rng);
    return Tensor::vector(std::move(v));
  };
  auto rmat = [&](int n, double lo, double hi) {
    std::vector<double> v(static_cast<size_t>(n) * n);
    for (auto& x : v) x = lo + (hi - lo) * u01(rng);
    return Tensor::matrix(n, n, std::move(v));
  };
  auto rscalar = [&](double lo, double hi) {
    return Tensor::scalar(lo + (hi - lo) * u01(rng));
  };

  double worst = 0.0;
  auto run = [&](const std::string& label, std::vector<Tensor> inputs, const BuildFn& f) {
    const double e = max_rel_grad_err(inputs, f);
    worst = std::max(worst, e);
    ++r.checks;
    if (!(e <= kGradTol)) fail(r, label + ": rel err " + fmt(e));
  };

  run("filter", {rvec(5, 0.2, 0.8), rvec(5, 0.2, 0.8)},
      [](Tape& t, const std::vector<DiffValue>& xs) {
        return sum(t, op_filter(t, xs[0], xs[1]));
      });
  run("filter-of-one", {rvec(5, 0.2, 0.8)},
      [](Tape& t, const std::vector<DiffValue>& xs) {
        return sum(t, op_filter(t, xs[0], op_one(t, 5)));
      });
  run("neg", {rvec(5, 0.2, 0.8)}, [](Tape& t, const std::vector<DiffValue>& xs) {
    return sum(t, op_neg(t, xs[0]));
  });
  run("vec-and", {rvec(5, 0.2, 0.8), rvec(5, 0.2, 0.8)},
      [](Tape& t, const std::vector<DiffValue>& xs) {
        return sum(t, op_vec_and(t, xs[0], xs[1]));
      });

  for (const Quantifier q : {Quantifier::Exists, Quantifier::ForAll, Quantifier::NotExists}) {
    for (const ExecMode mode : {ExecMode::Exact, ExecMode::Training}) {
      const std::string tag = std::string(quantifier_name(q)) +
                              (mode == ExecMode::Training ? "-train" : "-exact");
      run("aggregate-" + tag, {rvec(6, 0.2, 0.8)},
          [q, mode](Tape& t, const std::vector<DiffValue>& xs) {
            return aggregate(t, q, xs[0], mode);
          });
      run("q-product-" + tag, {rmat(5, 0.2, 0.8), rvec(5, 0.2, 0.8)},
          [q, mode](Tape& t, const std::vector<DiffValue>& xs) {
            return sum(t, q_product(t, xs[0], xs[1], q, mode));
          });
      run("relate-subject-" + tag,
          {rmat(4, 0.2, 0.8), rmat(4, 0.2, 0.8), rvec(4, 0.2, 0.8)},
          [q, mode](Tape& t, const std::vector<DiffValue>& xs) {
            return sum(t, op_relate(t, {xs[0], xs[1]}, Role::Subject, q, xs[2], mode));
          });
      run("relate-object-" + tag, {rmat(4, 0.2, 0.8), rvec(4, 0.2, 0.8)},
          [q, mode](Tape& t, const std::vector<DiffValue>& xs) {
            return sum(t, op_relate(t, {xs[0]}, Role::Object, q, xs[1], mode));
          });
    }
  }

  run("scalar-and", {rscalar(0.2, 0.8), rscalar(0.2, 0.8)},
      [](Tape& t, const std::vector<DiffValue>& xs) {
        return op_scalar_and(t, xs[0], xs[1]);
      });
  run("scalar-or", {rscalar(0.2, 0.8), rscalar(0.2, 0.8)},
      [](Tape& t, const std::vector<DiffValue>& xs) {
        return op_scalar_or(t, xs[0], xs[1]);
      });
  run("scalar-not", {rscalar(0.2, 0.8)}, [](Tape& t, const std::vector<DiffValue>& xs) {
    return op_scalar_not(t, xs[0]);
  });
  run("scalar-mix", {rvec(6, 0.2, 0.8), rvec(6, 0.2, 0.8), rscalar(0.2, 0.8)},
      [](Tape& t, const std::vector<DiffValue>& xs) {
        const DiffValue a = aggregate(t, Quantifier::Exists, xs[0], ExecMode::Exact);
        const DiffValue b = aggregate(t, Quantifier::ForAll, xs[1], ExecMode::Exact);
        return op_scalar_or(t, op_scalar_and(t, a, b), op_scalar_not(t, xs[2]));
      });

  const double raw1 = softplus_inverse_one();
  for (const ExecMode mode : {ExecMode::Exact, ExecMode::Training}) {
    const std::string tag = mode == ExecMode::Training ? "train" : "exact";
    run("calibrate-raw-" + tag,
        {rvec(3, 0.1, 0.9), rscalar(raw1 - 0.5, raw1 + 0.5),
         rscalar(raw1 - 0.5, raw1 + 0.5), rscalar(-1.0, 1.0),
         rscalar(raw1 - 0.5, raw1 + 0.5)},
        [mode](Tape& t, const std::vector<DiffValue>& xs) {
          return sum(t, calibrate_raw(t, xs[0], xs[1], xs[2], xs[3], xs[4], mode));
        });
  }
  run("calibrate-constrained",
      {rvec(3, 0.1, 0.9), rscalar(0.5, 2.0), rscalar(0.5, 2.0), rscalar(0.2, 0.8),
       rscalar(0.5, 2.0)},
      [](Tape& t, const std::vector<DiffValue>& xs) {
        return sum(t, calibrate(t, xs[0], xs[1], xs[2], xs[3], xs[4], ExecMode::Exact));
      });

  r.notes.push_back(std::to_string(r.checks) + " operator cases, worst rel err = " +
                    fmt(worst));
  return r;
}

SuiteResult selftest_gradcheck_end_to_end(int programs, uint64_t seed) {
  SuiteResult r;
  r.name = "gradcheck-end-to-end";
  GenConfig cfg;
  cfg.seed = seed;
  cfg.scenes = std::max(1, programs);
  cfg.questions_per_scene = 3;
  cfg.max_objects = 6;
  const Dataset d = generate(cfg);
  std::mt19937_64 rng(seed * 0x9e3779b97f4a7c15ULL + 4);
  int done = 0;
  int params = 0;
  double worst_all = 0.0;
  for (const auto& q : d.questions) {
    if (done >= programs) break;
    const int n = d.scene_of(q).size();
    AtomTableOracle table(d.vocab, n);
    // Interior values keep every product factor away from 0 and 1, so the
    // true gradients stay large enough for the relative test to be meaningful.
    table.fill_random(rng(), 0.2, 0.8);
    ExecOptions opt;
    opt.mode = done % 4 == 3 ? ExecMode::Training : ExecMode::Exact;

    table.set_tracked(true);
    Tape tape;
    const EngineOutput out = execute(q.compiled, table, tape, opt);
    DiffValue loss = out.terminal;
    if (out.open) loss = sum(tape, concat(tape, out.candidate_values));
    const std::vector<Tensor> grads = tape.backward(loss);

    std::set<std::string> unary_preds, rel_preds;
    for (const auto& s : q.compiled.steps) {
      if (s.kind == DfolOpKind::Filter) unary_preds.insert(s.concepts[0]);
      if (s.kind == DfolOpKind::Relate)
        for (const auto& tok : s.concepts) rel_preds.insert(tok);
    }
    std::map<std::string, Tensor> grad_of;
    for (const auto& p : unary_preds)
      grad_of[p] = grads[static_cast<size_t>(table.leaf_id(p))];
    for (const auto& p : rel_preds)
      grad_of[p] = grads[static_cast<size_t>(table.leaf_id(p))];
    table.set_tracked(false);

    auto eval = [&]() {
      Tape t2;
      const EngineOutput o = execute(q.compiled, table, t2, opt);
      if (!o.open) return o.terminal.value.scalar_value();
      double s = 0.0;
      for (const auto& cv : o.candidate_values) s += cv.value.scalar_value();
      return s;
    };

    double worst = 0.0;
    auto probe = [&](double analytic, double old, const std::function<void(double)>& set) {
      set(old + kFdStep);
      const double hi = eval();
      set(old - kFdStep);
      const double lo = eval();
      set(old);
      const double fd = (hi - lo) / (2.0 * kFdStep);
      worst = std::max(worst, std::abs(analytic - fd) / (std::abs(fd) + 1e-8));
      ++params;
    };
    for (const auto& p : unary_preds) {
      const Tensor& g = grad_of[p];
      for (int i = 0; i < n; ++i)
        probe(g[i], table.unary(p, i), [&](double v) { table.set_unary(p, i, v); });
    }
    for (const auto& p : rel_preds) {
      const Tensor& g = grad_of[p];
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
          probe(g.at(i, j), table.relation(p, i, j),
                [&](double v) { table.set_relation(p, i, j, v); });
    }
    worst_all = std::max(worst_all, worst);
    ++r.checks;
    if (!(worst <= kGradTol)) fail(r, q.id + ": rel err " + fmt(worst));
    ++done;
  }
  r.notes.push_back(std::to_string(done) + " programs, " + std::to_string(params) +
                    " parameters, worst rel err = " + fmt(worst_all));
  return r;
}

SuiteResult selftest_calibration_shape(int param_grid, int alpha_grid) {
  SuiteResult r;
  r.name = "calibration-shape";
  const auto [ia, ib, ic, id_] = CalibParams::identity().constrained();
  double max_id_diff = 0.0;
  for (int k = 0; k <= 100; ++k) {
    const double alpha = k / 100.0;
    const double diff = std::abs(calibrate_value(alpha, ia, ib, ic, id_) - alpha);
    max_id_diff = std::max(max_id_diff, diff);
    ++r.checks;
    if (!(diff <= 1e-12)) fail(r, "identity params drift at alpha " + fmt(alpha));
  }

  auto log_grid = [&](double lo, double hi) {
    std::vector<double> v;
    for (int i = 0; i < param_grid; ++i) {
      const double f = param_grid == 1 ? 0.0 : static_cast<double>(i) / (param_grid - 1);
      v.push_back(lo * std::pow(hi / lo, f));
    }
    return v;
  };
  auto lin_grid = [&](double lo, double hi) {
    std::vector<double> v;
    for (int i = 0; i < param_grid; ++i) {
      const double f = param_grid == 1 ? 0.0 : static_cast<double>(i) / (param_grid - 1);
      v.push_back(lo + (hi - lo) * f);
    }
    return v;
  };

  for (const double a : log_grid(0.5, 3.0)) {
    for (const double b : log_grid(0.5, 3.0)) {
      for (const double c : lin_grid(0.1, 0.9)) {
        for (const double dd : log_grid(0.25, 4.0)) {
          ++r.checks;
          if (calibrate_value(0.0, a, b, c, dd) != 0.0)
            fail(r, "C(0) != 0 at a=" + fmt(a) + " b=" + fmt(b));
          ++r.checks;
          if (calibrate_value(1.0, a, b, c, dd) != 1.0)
            fail(r, "C(1) != 1 at a=" + fmt(a) + " b=" + fmt(b));
          double prev = calibrate_value(0.0, a, b, c, dd);
          for (int k = 1; k <= alpha_grid + 1; ++k) {
            const double alpha = static_cast<double>(k) / (alpha_grid + 1);
            const double cur = calibrate_value(alpha, a, b, c, dd);
            ++r.checks;
            if (!(cur > prev))
              fail(r, "not strictly increasing at alpha " + fmt(alpha) + ", a=" +
                          fmt(a) + " b=" + fmt(b) + " c=" + fmt(c) + " d=" + fmt(dd));
            prev = cur;
          }
        }
      }
    }
  }
  // Prior effect: raising c raises the output for any interior alpha.
  for (const double a : log_grid(0.5, 3.0)) {
    for (const double b : log_grid(0.5, 3.0)) {
      for (const double dd : log_grid(0.25, 4.0)) {
        for (const double alpha : {0.1, 0.5, 0.9}) {
          double prev = -1.0;
          for (const double c : lin_grid(0.05, 0.95)) {
            const double cur = calibrate_value(alpha, a, b, c, dd);
            ++r.checks;
            if (!(cur > prev))
              fail(r, "not strictly increasing in c at alpha " + fmt(alpha));
            prev = cur;
          }
        }
      }
    }
  }
  r.notes.push_back("identity max drift = " + fmt(max_id_diff) + ", " +
                    std::to_string(param_grid) + "^4 parameter grid");
  return r;
}

namespace {

struct CoherenceCase {
  DslProgram program;
  std::vector<FormulaPtr> expected;     // one per candidate; one entry if binary
  std::vector<std::string> candidates;  // empty for binary rows
};

DslStep mk(DslOpKind op, std::vector<std::string> args, std::vector<int> inputs) {
  DslStep s;
  s.op = op;
  s.args = std::move(args);
  s.inputs = std::move(inputs);
  return s;
}

std::string samp_name(const SceneGraph& sc, const ConceptVocabulary& vocab,
                      std::mt19937_64& rng) {
  if (coin(rng) && sc.size() > 0)
    return sc.objects[pick(rng, sc.objects.size())].name;
  return choice(vocab.concepts_of("name"), rng);
}

std::string samp_unary(const ConceptVocabulary& vocab, std::mt19937_64& rng) {
  return choice(vocab.unary_concepts(), rng);
}

std::string samp_category(const ConceptVocabulary& vocab, std::mt19937_64& rng) {
  return choice(vocab.category_names(), rng);
}

struct RelArgs {
  std::string n, m, rel, role;
};

// Biased toward scene-grounded triples so "yes" cases show up; the uniform
// branch supplies the "no" side.
RelArgs samp_rel(const SceneGraph& sc, const ConceptVocabulary& vocab,
                 std::mt19937_64& rng) {
  RelArgs a;
  if (coin(rng) && !sc.relations.empty()) {
    const auto& [s, rel, o] = sc.relations[pick(rng, sc.relations.size())];
    a.rel = rel;
    if (coin(rng)) {
      a.role = "subject";
      a.n = sc.objects[static_cast<size_t>(s)].name;
      a.m = sc.objects[static_cast<size_t>(o)].name;
    } else {
      a.role = "object";
      a.n = sc.objects[static_cast<size_t>(o)].name;
      a.m = sc.objects[static_cast<size_t>(s)].name;
    }
  } else {
    a.n = samp_name(sc, vocab, rng);
    a.m = samp_name(sc, vocab, rng);
    a.rel = choice(vocab.binary_relations(), rng);
    a.role = coin(rng) ? "subject" : "object";
  }
  return a;
}

// exists Y (m(Y) and exists X (n(X) and r(., .))), with the input variable X
// in the slot the role token names.
FormulaPtr relate_reading(const std::string& n, const std::string& m,
                          const std::string& rel, const std::string& role) {
  const FormulaPtr r_atom =
      role == "subject" ? make_rel(rel, "X", "Y") : make_rel(rel, "Y", "X");
  const FormulaPtr inner =
      make_quant(Quantifier::Exists, "X", make_and(make_atom(n, "X"), r_atom));
  return make_quant(Quantifier::Exists, "Y", make_and(make_atom(m, "Y"), inner));
}

FormulaPtr exists_reading(const std::string& n) {
  return make_quant(Quantifier::Exists, "X", make_atom(n, "X"));
}

FormulaPtr attr_reading(const std::string& n, const std::string& a) {
  return make_quant(Quantifier::Exists, "X",
                    make_and(make_atom(a, "X"), make_atom(n, "X")));
}

FormulaPtr two_same_reading(const std::string& n, const std::string& m,
                            const std::vector<std::string>& pool) {
  FormulaPtr agree;
  for (const auto& c : pool) {
    FormulaPtr pair = make_and(make_atom(c, "X"), make_atom(c, "Y"));
    agree = agree ? make_or(agree, pair) : pair;
  }
  const FormulaPtr inner =
      make_quant(Quantifier::Exists, "Y", make_and(make_atom(m, "Y"), agree));
  return make_quant(Quantifier::Exists, "X", make_and(make_atom(n, "X"), inner));
}

FormulaPtr all_same_reading(const std::string& n, const std::vector<std::string>& pool) {
  FormulaPtr any;
  for (const auto& c : pool) {
    FormulaPtr uniform = make_quant(
        Quantifier::ForAll, "X",
        make_or(make_not(make_atom(n, "X")), make_atom(c, "X")));
    any = any ? make_or(any, uniform) : uniform;
  }
  return any;
}

// One operator row per index; the expected formulas are written from the
// documented reading of the row, independent of the compiler's lowering.
CoherenceCase coherence_case(int row, const SceneGraph& sc,
                             const ConceptVocabulary& vocab, std::mt19937_64& rng) {
  CoherenceCase cc;
  switch (row) {
    case 0:    // GSelect
    case 8: {  // GExists
      const std::string n = samp_name(sc, vocab, rng);
      cc.program.steps = {mk(DslOpKind::GSelect, {n}, {}),
                          mk(DslOpKind::GExists, {}, {0})};
      cc.expected = {exists_reading(n)};
      return cc;
    }
    case 1: {  // GFilter
      const std::string n = samp_name(sc, vocab, rng);
      const std::string a = samp_unary(vocab, rng);
      cc.program.steps = {mk(DslOpKind::GSelect, {n}, {}),
                          mk(DslOpKind::GFilter, {a}, {0}),
                          mk(DslOpKind::GExists, {}, {1})};
      cc.expected = {attr_reading(n, a)};
      return cc;
    }
    case 2: {  // GRelate
      const RelArgs a = samp_rel(sc, vocab, rng);
      cc.program.steps = {mk(DslOpKind::GSelect, {a.n}, {}),
                          mk(DslOpKind::GRelate, {a.m, a.rel, a.role}, {0}),
                          mk(DslOpKind::GExists, {}, {1})};
      cc.expected = {relate_reading(a.n, a.m, a.rel, a.role)};
      return cc;
    }
    case 3: {  // GVerifyAttr
      const std::string n = samp_name(sc, vocab, rng);
      const std::string a = samp_unary(vocab, rng);
      cc.program.steps = {mk(DslOpKind::GSelect, {n}, {}),
                          mk(DslOpKind::GVerifyAttr, {a}, {0})};
      cc.expected = {attr_reading(n, a)};
      return cc;
    }
    case 4: {  // GVerifyRel
      const RelArgs a = samp_rel(sc, vocab, rng);
      cc.program.steps = {mk(DslOpKind::GSelect, {a.n}, {}),
                          mk(DslOpKind::GVerifyRel, {a.m, a.rel, a.role}, {0})};
      cc.expected = {relate_reading(a.n, a.m, a.rel, a.role)};
      return cc;
    }
    case 5: {  // GQuery
      const std::string n = samp_name(sc, vocab, rng);
      const std::string cat = samp_category(vocab, rng);
      cc.program.steps = {mk(DslOpKind::GSelect, {n}, {}),
                          mk(DslOpKind::GQuery, {cat}, {0})};
      cc.candidates = vocab.concepts_of(cat);
      for (const auto& c : cc.candidates) cc.expected.push_back(attr_reading(n, c));
      return cc;
    }
    case 6: {  // GChooseAttr
      const std::string n = samp_name(sc, vocab, rng);
      const auto& cats = vocab.category_names();
      std::string cat = choice(cats, rng);
      while (vocab.concepts_of(cat).size() < 2) cat = choice(cats, rng);
      const auto& pool = vocab.concepts_of(cat);
      const std::string a1 = choice(pool, rng);
      std::string a2 = a1;
      while (a2 == a1) a2 = choice(pool, rng);
      cc.program.steps = {mk(DslOpKind::GSelect, {n}, {}),
                          mk(DslOpKind::GChooseAttr, {a1, a2}, {0})};
      cc.candidates = {a1, a2};
      cc.expected = {attr_reading(n, a1), attr_reading(n, a2)};
      return cc;
    }
    case 7: {  // GChooseRel
      const RelArgs a = samp_rel(sc, vocab, rng);
      std::string r2 = a.rel;
      while (r2 == a.rel) r2 = choice(vocab.binary_relations(), rng);
      cc.program.steps = {mk(DslOpKind::GSelect, {a.n}, {}),
                          mk(DslOpKind::GChooseRel, {a.m, a.rel, r2, a.role}, {0})};
      cc.candidates = {a.rel, r2};
      cc.expected = {relate_reading(a.n, a.m, a.rel, a.role),
                     relate_reading(a.n, a.m, r2, a.role)};
      return cc;
    }
    case 9:     // GAnd
    case 10: {  // GOr
      const std::string n = samp_name(sc, vocab, rng);
      const std::string m = samp_name(sc, vocab, rng);
      const DslOpKind op = row == 9 ? DslOpKind::GAnd : DslOpKind::GOr;
      cc.program.steps = {mk(DslOpKind::GSelect, {n}, {}), mk(DslOpKind::GExists, {}, {0}),
                          mk(DslOpKind::GSelect, {m}, {}), mk(DslOpKind::GExists, {}, {2}),
                          mk(op, {}, {1, 3})};
      cc.expected = {row == 9 ? make_and(exists_reading(n), exists_reading(m))
                              : make_or(exists_reading(n), exists_reading(m))};
      return cc;
    }
    case 11:    // GTwoSame
    case 12: {  // GTwoDifferent
      const std::string n = samp_name(sc, vocab, rng);
      const std::string m = samp_name(sc, vocab, rng);
      const std::string cat = samp_category(vocab, rng);
      const DslOpKind op = row == 11 ? DslOpKind::GTwoSame : DslOpKind::GTwoDifferent;
      cc.program.steps = {mk(DslOpKind::GSelect, {n}, {}),
                          mk(DslOpKind::GSelect, {m}, {}), mk(op, {cat}, {0, 1})};
      const FormulaPtr same = two_same_reading(n, m, vocab.concepts_of(cat));
      cc.expected = {row == 11 ? same : make_not(same)};
      return cc;
    }
    default: {  // 13: GAllSame
      const std::string n = samp_name(sc, vocab, rng);
      const std::string cat = samp_category(vocab, rng);
      cc.program.steps = {mk(DslOpKind::GSelect, {n}, {}),
                          mk(DslOpKind::GAllSame, {cat}, {0})};
      cc.expected = {all_same_reading(n, vocab.concepts_of(cat))};
      return cc;
    }
  }
}

const char* kRowNames[14] = {"GSelect",    "GFilter",       "GRelate",  "GVerifyAttr",
                             "GVerifyRel", "GQuery",        "GChooseAttr", "GChooseRel",
                             "GExists",    "GAnd",          "GOr",      "GTwoSame",
                             "GTwoDifferent", "GAllSame"};

}  // namespace

SuiteResult selftest_coherence(int scenes_per_row, uint64_t seed) {
  SuiteResult r;
  r.name = "coherence";
  const ConceptVocabulary vocab = default_vocabulary();
  std::mt19937_64 rng(seed * 0x9e3779b97f4a7c15ULL + 5);
  for (int row = 0; row < 14; ++row) {
    for (int s = 0; s < scenes_per_row; ++s) {
      const SceneGraph sc = random_scene(vocab, rng, 2, 8);
      const CoherenceCase cc = coherence_case(row, sc, vocab, rng);
      const DslProgram parsed = parse_dsl(print_dsl(cc.program));
      check_against_vocab(parsed, vocab);
      const DfolProgram compiled = compile_dsl(parsed, vocab);
      GoldenOracle oracle(sc, vocab);
      Tape tape;
      const EngineOutput out = execute(compiled, oracle, tape);
      if (out.open) {
        ++r.checks;
        if (out.candidates != cc.candidates) {
          fail(r, std::string(kRowNames[row]) + ": candidate tokens diverge");
          continue;
        }
        for (size_t k = 0; k < cc.expected.size(); ++k) {
          const bool soft = out.candidate_values[k].value.scalar_value() > 0.5;
          const bool crisp = crisp_eval(*cc.expected[k], sc, vocab);
          ++r.checks;
          if (soft != crisp)
            fail(r, std::string(kRowNames[row]) + " candidate '" + cc.candidates[k] +
                        "': engine " + (soft ? "yes" : "no") + " vs reading " +
                        (crisp ? "yes" : "no"));
        }
      } else {
        const bool soft = out.terminal.value.scalar_value() > 0.5;
        const bool crisp = crisp_eval(*cc.expected[0], sc, vocab);
        ++r.checks;
        if (soft != crisp)
          fail(r, std::string(kRowNames[row]) + ": engine " + (soft ? "yes" : "no") +
                      " vs reading " + (crisp ? "yes" : "no"));
      }
    }
  }
  r.notes.push_back("14 operator rows, " + std::to_string(scenes_per_row) +
                    " scenes per row");
  return r;
}

SuiteResult selftest_generator_determinism(uint64_t seed) {
  SuiteResult r;
  r.name = "generator-determinism";
  GenConfig cfg;
  cfg.seed = seed;
  cfg.scenes = 12;
  cfg.questions_per_scene = 4;
  const Dataset a = generate(cfg);
  const Dataset b = generate(cfg);
  ++r.checks;
  if (a.vocab.to_json_text() != b.vocab.to_json_text()) fail(r, "vocab text diverges");
  ++r.checks;
  if (a.scenes.size() != b.scenes.size() || a.questions.size() != b.questions.size()) {
    fail(r, "dataset sizes diverge");
    return r;
  }
  for (size_t i = 0; i < a.scenes.size(); ++i) {
    ++r.checks;
    if (scene_to_json_text(a.scenes[i]) != scene_to_json_text(b.scenes[i]) ||
        a.scene_ids[i] != b.scene_ids[i])
      fail(r, "scene " + a.scene_ids[i] + " diverges");
  }
  for (size_t i = 0; i < a.questions.size(); ++i) {
    const Question& qa = a.questions[i];
    const Question& qb = b.questions[i];
    ++r.checks;
    if (qa.id != qb.id || qa.scene_id != qb.scene_id || qa.gold != qb.gold ||
        qa.program_text != qb.program_text || qa.entails != qb.entails)
      fail(r, "question " + qa.id + " diverges");
  }
  r.notes.push_back(std::to_string(a.questions.size()) + " questions identical across reruns");
  return r;
}

std::vector<SuiteResult> run_selftest_suites() {
  return {
      selftest_crisp_soundness(60, 5, 11),
      selftest_engine_reference(150, 12),
      selftest_single_variable(60, 13),
      selftest_gradcheck_ops(14),
      selftest_gradcheck_end_to_end(12, 15),
      selftest_calibration_shape(4, 40),
      selftest_coherence(25, 16),
      selftest_generator_determinism(17),
  };
}

}  // namespace nfol
