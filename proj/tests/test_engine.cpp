#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include <nfol/engine.hpp>
#include <nfol/oracle.hpp>

#include "test_util.hpp"

using namespace nfol;

namespace {

DfolProgram select_exists(const std::string& token, Quantifier q = Quantifier::Exists) {
  DfolProgram p;
  p.steps.push_back({DfolOpKind::One, {}, {}, Role::Subject, Quantifier::Exists});
  p.steps.push_back({DfolOpKind::Filter, {0}, {token}, Role::Subject, Quantifier::Exists});
  p.steps.push_back({DfolOpKind::Aggregate, {1}, {}, Role::Subject, q});
  return p;
}

}  // namespace

TEST_CASE("aggregate conventions") {
  Tape t;
  DiffValue v = t.leaf(Tensor::vector({0.5, 0.5}));
  CHECK(aggregate(t, Quantifier::Exists, v, ExecMode::Exact).value.scalar_value() == 0.75);
  CHECK(aggregate(t, Quantifier::ForAll, v, ExecMode::Exact).value.scalar_value() == 0.25);
  CHECK(aggregate(t, Quantifier::NotExists, v, ExecMode::Exact).value.scalar_value() == 0.25);

  DiffValue empty = t.leaf(Tensor::vector(std::vector<double>{}));
  CHECK(aggregate(t, Quantifier::Exists, empty, ExecMode::Exact).value.scalar_value() == 0.0);
  CHECK(aggregate(t, Quantifier::ForAll, empty, ExecMode::Exact).value.scalar_value() == 1.0);
  CHECK(aggregate(t, Quantifier::NotExists, empty, ExecMode::Exact).value.scalar_value() == 1.0);
}

TEST_CASE("q_product skips the diagonal") {
  Tape t;
  // m = [[0.9, 0.5], [0.25, 0.9]]; diagonal must not contribute.
  DiffValue m = t.leaf(Tensor::matrix(2, 2, {0.9, 0.5, 0.25, 0.9}));
  DiffValue v = t.leaf(Tensor::vector({1.0, 1.0}));
  DiffValue ex = q_product(t, m, v, Quantifier::Exists, ExecMode::Exact);
  CHECK(ex.value[0] == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(ex.value[1] == doctest::Approx(0.25).epsilon(1e-15));
  DiffValue fa = q_product(t, m, v, Quantifier::ForAll, ExecMode::Exact);
  CHECK(fa.value[0] == doctest::Approx(0.5).epsilon(1e-15));
  DiffValue ne = q_product(t, m, v, Quantifier::NotExists, ExecMode::Exact);
  CHECK(ne.value[0] == doctest::Approx(0.5).epsilon(1e-15));

  // n = 1: no j != i exists, so conventions apply per row.
  Tape t1;
  DiffValue m1 = t1.leaf(Tensor::matrix(1, 1, {0.7}));
  DiffValue v1 = t1.leaf(Tensor::vector({0.7}));
  CHECK(q_product(t1, m1, v1, Quantifier::Exists, ExecMode::Exact).value[0] == 0.0);
  CHECK(q_product(t1, m1, v1, Quantifier::ForAll, ExecMode::Exact).value[0] == 1.0);
}

TEST_CASE("op_relate role semantics on the pinned scene") {
  ConceptVocabulary vocab = default_vocabulary();
  SceneGraph s = testutil::two_object_scene();
  GoldenOracle oracle(s, vocab);

  Tape t;
  DiffValue rel = oracle.relation_attention(t, "left");
  DiffValue chairs = oracle.unary_attention(t, "chair");

  // Output variable is the object of left(chair, Y): things a chair is left
  // of. Object 1 (the table) qualifies.
  DiffValue as_object = op_relate(t, {rel}, Role::Object, Quantifier::Exists,
                                  chairs, ExecMode::Exact);
  CHECK(as_object.value[0] == 0.0);
  CHECK(as_object.value[1] == 1.0);

  // Output variable is the subject of left(Y, chair): nothing is left of the
  // chair in this scene.
  DiffValue as_subject = op_relate(t, {rel}, Role::Subject, Quantifier::Exists,
                                   chairs, ExecMode::Exact);
  CHECK(as_subject.value[0] == 0.0);
  CHECK(as_subject.value[1] == 0.0);
}

TEST_CASE("vector ops") {
  Tape t;
  DiffValue a = t.leaf(Tensor::vector({0.25, 0.5}));
  DiffValue b = t.leaf(Tensor::vector({0.5, 0.5}));
  CHECK(op_one(t, 3).value.rows == 3);
  CHECK(op_one(t, 3).value[2] == 1.0);
  CHECK(op_filter(t, a, b).value[0] == 0.125);
  CHECK(op_neg(t, a).value[0] == 0.75);
  CHECK(op_vec_and(t, a, b).value[1] == 0.25);
  CHECK(op_scalar_and(t, constant(0.5), constant(0.5)).value.scalar_value() == 0.25);
  CHECK(op_scalar_or(t, constant(0.5), constant(0.5)).value.scalar_value() == 0.75);
  CHECK(op_scalar_not(t, constant(0.25)).value.scalar_value() == 0.75);
}

TEST_CASE("execute answers the pinned relational question") {
  ConceptVocabulary vocab = default_vocabulary();
  SceneGraph s = testutil::two_object_scene();
  GoldenOracle oracle(s, vocab);

  // Is there a table that a chair is left of?
  DfolProgram p;
  p.steps.push_back({DfolOpKind::One, {}, {}, Role::Subject, Quantifier::Exists});
  p.steps.push_back({DfolOpKind::Filter, {0}, {"chair"}, Role::Subject, Quantifier::Exists});
  p.steps.push_back({DfolOpKind::Relate, {1}, {"left"}, Role::Object, Quantifier::Exists});
  p.steps.push_back({DfolOpKind::Filter, {2}, {"table"}, Role::Subject, Quantifier::Exists});
  p.steps.push_back({DfolOpKind::Aggregate, {3}, {}, Role::Subject, Quantifier::Exists});
  validate_program(p);

  Tape tape;
  EngineOutput out = execute(p, oracle, tape);
  CHECK_FALSE(out.open);
  CHECK(out.terminal.value.scalar_value() == 1.0);
  CHECK(out.step_values.size() == 5);

  Answer ans = answer(p, oracle);
  CHECK(ans.text == "yes");
  CHECK(ans.likelihood == 1.0);
}

TEST_CASE("decide thresholds strictly and breaks ties low") {
  EngineOutput bin;
  bin.open = false;
  bin.terminal = constant(0.5);
  CHECK(decide(bin, 0.5).text == "no");  // strict >
  bin.terminal = constant(0.5 + 1e-12);
  CHECK(decide(bin, 0.5).text == "yes");

  EngineOutput open;
  open.open = true;
  open.candidates = {"red", "blue", "green"};
  open.candidate_values = {constant(0.3), constant(0.7), constant(0.7)};
  Answer a = decide(open);
  CHECK(a.text == "blue");
  CHECK(a.likelihood == 0.7);
  CHECK(a.candidate_likelihoods.size() == 3);
}

TEST_CASE("validate_program rejects malformed graphs") {
  DfolProgram fwd;
  fwd.steps.push_back({DfolOpKind::Filter, {0}, {"chair"}, Role::Subject, Quantifier::Exists});
  CHECK_KIND(validate_program(fwd), ErrorKind::Contract);

  DfolProgram no_term = select_exists("chair");
  no_term.steps.pop_back();
  CHECK_KIND(validate_program(no_term), ErrorKind::Contract);

  DfolProgram scalar_into_vec = select_exists("chair");
  scalar_into_vec.steps.push_back(
      {DfolOpKind::Neg, {2}, {}, Role::Subject, Quantifier::Exists});
  CHECK_KIND(validate_program(scalar_into_vec), ErrorKind::Contract);

  DfolProgram bad_arity = select_exists("chair");
  bad_arity.steps[1].inputs = {0, 0};
  CHECK_KIND(validate_program(bad_arity), ErrorKind::Contract);
}

TEST_CASE("engine matches the scalar reference on soft attentions") {
  ConceptVocabulary vocab = default_vocabulary();
  AtomTableOracle oracle(vocab, 4);
  oracle.fill_random(99);

  DfolProgram p;
  p.steps.push_back({DfolOpKind::One, {}, {}, Role::Subject, Quantifier::Exists});
  p.steps.push_back({DfolOpKind::Filter, {0}, {"chair"}, Role::Subject, Quantifier::Exists});
  p.steps.push_back({DfolOpKind::Relate, {1}, {"on"}, Role::Object, Quantifier::ForAll});
  p.steps.push_back({DfolOpKind::Filter, {2}, {"red"}, Role::Subject, Quantifier::Exists});
  p.steps.push_back({DfolOpKind::Aggregate, {3}, {}, Role::Subject, Quantifier::Exists});

  // The ForAll relate aggregates memberships m_ij * v_j, so the matching
  // formula conjoins the relation with the input attention.
  FormulaPtr f = parse_formula(
      "(exists Y (and (atom red Y) (forall X (and (atom chair X) (rel on X Y)))))");

  Tape tape;
  EngineOutput out = execute(p, oracle, tape);
  double ref = reference_eval(f, oracle);
  CHECK(std::abs(out.terminal.value.scalar_value() - ref) < 1e-12);
}

TEST_CASE("training and exact modes agree in the interior") {
  ConceptVocabulary vocab = default_vocabulary();
  AtomTableOracle oracle(vocab, 5);
  oracle.fill_random(7, 0.2, 0.8);

  DfolProgram p = select_exists("red", Quantifier::ForAll);
  Tape t1, t2;
  ExecOptions exact{ExecMode::Exact, nullptr};
  ExecOptions training{ExecMode::Training, nullptr};
  double a = execute(p, oracle, t1, exact).terminal.value.scalar_value();
  double b = execute(p, oracle, t2, training).terminal.value.scalar_value();
  CHECK(std::abs(a - b) < 1e-9);
}

TEST_CASE("calibration hook rewrites filter outputs") {
  ConceptVocabulary vocab = default_vocabulary();
  AtomTableOracle oracle(vocab, 3);
  oracle.fill_random(41, 0.2, 0.8);

  ContextTable table;
  table.vocab_hash = vocab.hash();
  table.defaults = CalibParams::identity();
  CalibParams excite;
  excite.raw_a = 0.2;
  excite.raw_b = -0.1;
  excite.raw_c = 0.3;
  excite.raw_d = 0.15;
  table.entries[ContextTable::make_key("chair", 1)] = excite;

  DfolProgram p = select_exists("chair");
  Tape t1, t2;
  ExecOptions plain;
  ExecOptions calibrated;
  calibrated.calibration = &table;
  double base = execute(p, oracle, t1, plain).terminal.value.scalar_value();
  double cal = execute(p, oracle, t2, calibrated).terminal.value.scalar_value();

  // The hook sees the filter output (attention times all-ones input).
  auto c = excite.constrained();
  double want = 1.0;
  for (int i = 0; i < 3; ++i)
    want *= 1.0 - calibrate_value(oracle.unary("chair", i), c[0], c[1], c[2], c[3]);
  CHECK(std::abs(cal - (1.0 - want)) < 1e-12);
  CHECK(cal != base);

  // Identity entries leave the program value unchanged.
  ContextTable ident;
  ident.vocab_hash = vocab.hash();
  ident.defaults = CalibParams::identity();
  Tape t3;
  ExecOptions with_ident;
  with_ident.calibration = &ident;
  double same = execute(p, oracle, t3, with_ident).terminal.value.scalar_value();
  CHECK(std::abs(same - base) < 1e-12);
}
