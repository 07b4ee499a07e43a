#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include <nfol/engine.hpp>
#include <nfol/featurize.hpp>
#include <nfol/oracle.hpp>
#include <nfol/oracle_model.hpp>

#include "test_util.hpp"

using namespace nfol;

TEST_CASE("golden oracle serves exact indicators") {
  ConceptVocabulary v = default_vocabulary();
  SceneGraph s = testutil::two_object_scene();
  GoldenOracle oracle(s, v);
  CHECK(oracle.object_count() == 2);

  Tape t;
  DiffValue chair = oracle.unary_attention(t, "chair");
  CHECK(chair.value[0] == 1.0);
  CHECK(chair.value[1] == 0.0);
  CHECK_FALSE(chair.tracked());

  DiffValue left = oracle.relation_attention(t, "left");
  CHECK(left.value.at(0, 1) == 1.0);
  CHECK(left.value.at(1, 0) == 0.0);
  CHECK(t.size() == 0);  // golden attentions are constants

  CHECK_KIND(oracle.unary_attention(t, "zebra"), ErrorKind::Vocab);
}

TEST_CASE("atom table set, get, and fill") {
  ConceptVocabulary v = default_vocabulary();
  AtomTableOracle o(v, 3);
  o.set_unary("chair", 1, 0.8);
  o.set_relation("left", 0, 2, 0.6);
  CHECK(o.unary("chair", 1) == 0.8);
  CHECK(o.relation("left", 0, 2) == 0.6);
  CHECK_KIND(o.set_unary("chair", 3, 0.5), ErrorKind::Index);
  CHECK_KIND(o.set_unary("zebra", 0, 0.5), ErrorKind::Vocab);

  o.fill_random(5, 0.2, 0.8);
  for (const std::string& c : v.unary_concepts())
    for (int i = 0; i < 3; ++i) {
      CHECK(o.unary(c, i) >= 0.2);
      CHECK(o.unary(c, i) <= 0.8);
    }

  AtomProb p = o.prob_fn();
  CHECK(p("chair", 1, -1) == o.unary("chair", 1));
  CHECK(p("left", 0, 2) == o.relation("left", 0, 2));

  auto probs = o.atom_probs();
  CHECK(probs.at({"chair", 1, -1}) == o.unary("chair", 1));
  CHECK(probs.at({"left", 0, 2}) == o.relation("left", 0, 2));
}

TEST_CASE("atom table fill_crisp matches the golden oracle") {
  ConceptVocabulary v = default_vocabulary();
  SceneGraph s = testutil::two_object_scene();
  AtomTableOracle o(v, 2);
  o.fill_crisp(s);
  GoldenOracle g(s, v);
  Tape t;
  for (const std::string& c : v.unary_concepts()) {
    DiffValue want = g.unary_attention(t, c);
    for (int i = 0; i < 2; ++i) CHECK(o.unary(c, i) == want.value[i]);
  }
  for (const std::string& r : v.binary_relations()) {
    DiffValue want = g.relation_attention(t, r);
    CHECK(o.relation(r, 0, 1) == want.value.at(0, 1));
    CHECK(o.relation(r, 1, 0) == want.value.at(1, 0));
  }
}

TEST_CASE("tracked atom table exposes differentiable leaves") {
  ConceptVocabulary v = default_vocabulary();
  AtomTableOracle o(v, 3);
  o.fill_random(9, 0.2, 0.8);
  o.set_tracked(true);

  Tape t;
  DiffValue a = o.unary_attention(t, "chair");
  DiffValue b = o.unary_attention(t, "chair");
  CHECK(a.tracked());
  CHECK(a.id == b.id);  // one leaf per predicate per tape
  CHECK(o.leaf_id("chair") == a.id);

  DiffValue loss = aggregate(t, Quantifier::Exists, a, ExecMode::Exact);
  std::vector<Tensor> g = t.backward(loss);
  // d(1 - prod(1 - a_i))/d a_0 = prod_{j != 0} (1 - a_j)
  double want = (1.0 - o.unary("chair", 1)) * (1.0 - o.unary("chair", 2));
  CHECK(std::abs(g[a.id][0] - want) < 1e-12);

  CHECK_KIND(o.leaf_id("table"), ErrorKind::Contract);
  o.set_tracked(false);
  Tape t2;
  CHECK_FALSE(o.unary_attention(t2, "chair").tracked());
}

TEST_CASE("model initialization is seed-deterministic") {
  ConceptVocabulary v = default_vocabulary();
  OracleConfig cfg;
  cfg.hidden = 16;
  cfg.hidden_layers = 1;
  cfg.pair_proj = 8;
  OracleModel a(v, cfg, 123);
  OracleModel b(v, cfg, 123);
  OracleModel c(v, cfg, 124);
  CHECK(a.param_hash() == b.param_hash());
  CHECK(a.to_json_text() == b.to_json_text());
  CHECK(a.param_hash() != c.param_hash());
  CHECK(a.feature_dim() == v.unary_count() + 4);
}

TEST_CASE("model json round trip and guards") {
  ConceptVocabulary v = default_vocabulary();
  OracleConfig cfg;
  cfg.hidden = 12;
  cfg.hidden_layers = 1;
  cfg.pair_proj = 6;
  OracleModel m(v, cfg, 7);
  std::string text = m.to_json_text();
  OracleModel back = OracleModel::from_json_text(text, v);
  CHECK(back.param_hash() == m.param_hash());
  CHECK(back.to_json_text() == text);

  ConceptVocabulary other({{"name", {"cube", "ball"}}}, {"near"});
  CHECK_KIND(OracleModel::from_json_text(text, other), ErrorKind::Data);
  CHECK_KIND(OracleModel::from_json_text("{bad", v), ErrorKind::Data);
}

TEST_CASE("neural oracle forward shapes and constant folding") {
  ConceptVocabulary v = default_vocabulary();
  OracleConfig cfg;
  cfg.hidden = 16;
  cfg.hidden_layers = 2;
  cfg.pair_proj = 8;
  OracleModel m(v, cfg, 3);
  SceneGraph s = testutil::two_object_scene();
  Featurization f = make_featurization(s, v, {}, 1);
  CHECK(f.dim == m.feature_dim());
  CHECK(f.size() == 2);

  Tape t;
  BoundModel bound = BoundModel::bind(t, m, false);
  NeuralOracle oracle(t, bound, v, f);
  CHECK(oracle.object_count() == 2);
  DiffValue u = oracle.unary_attention(t, "chair");
  CHECK(u.value.rows == 2);
  for (int i = 0; i < 2; ++i) {
    CHECK(u.value[i] > 0.0);
    CHECK(u.value[i] < 1.0);
  }
  DiffValue r = oracle.relation_attention(t, "left");
  CHECK(r.value.rank == 2);
  CHECK(r.value.rows == 2);
  CHECK(t.size() == 0);  // untracked bind folds the whole forward

  Tape t2;
  BoundModel tracked = BoundModel::bind(t2, m, true);
  NeuralOracle oracle2(t2, tracked, v, f);
  DiffValue u2 = oracle2.unary_attention(t2, "chair");
  CHECK(u2.tracked());
  CHECK(u2.value[0] == u.value[0]);  // same numbers either way
  CHECK(t2.size() > 0);

  // a tracked bind refuses to serve a different tape
  Tape t3;
  CHECK_KIND(oracle2.unary_attention(t3, "chair"), ErrorKind::Contract);
}

TEST_CASE("clean features decode back to the scene") {
  ConceptVocabulary v = default_vocabulary();
  SceneGraph s = testutil::two_object_scene();
  Featurization f = make_featurization(s, v, {}, 99);
  for (int i = 0; i < 2; ++i) {
    DecodedObject d = decode_object(f.vectors[i], v);
    CHECK(d.name == s.objects[i].name);
    CHECK(d.attributes == s.objects[i].attributes);
  }
  // bbox block rides along unchanged
  CHECK(f.vectors[0][v.unary_count() + 0] == s.objects[0].bbox[0]);
  CHECK(f.vectors[1][v.unary_count() + 3] == s.objects[1].bbox[3]);
}

TEST_CASE("corruption is deterministic in the seed and scales with rho") {
  ConceptVocabulary v = default_vocabulary();
  SceneGraph s = testutil::two_object_scene();
  CorruptionSpec spec{0.9, 0.2};
  Featurization a = make_featurization(s, v, spec, 7);
  Featurization b = make_featurization(s, v, spec, 7);
  CHECK(a.vectors == b.vectors);
  Featurization c = make_featurization(s, v, spec, 8);
  CHECK(a.vectors != c.vectors);

  // clean featurization is exactly the indicators
  Featurization clean = make_featurization(s, v, {}, 7);
  int chair = v.unary_index("chair");
  CHECK(clean.vectors[0][chair] == 1.0);
  CHECK(clean.vectors[1][chair] == 0.0);

  CHECK(scene_stream_seed(1, "s_000001") != scene_stream_seed(1, "s_000002"));
  CHECK(scene_stream_seed(1, "s_000001") == scene_stream_seed(1, "s_000001"));
}

TEST_CASE("dropout context perturbs training forwards only when enabled") {
  ConceptVocabulary v = default_vocabulary();
  OracleConfig cfg;
  cfg.hidden = 16;
  cfg.hidden_layers = 1;
  cfg.pair_proj = 8;
  cfg.dropout = 0.5;
  OracleModel m(v, cfg, 3);
  SceneGraph s = testutil::two_object_scene();
  Featurization f = make_featurization(s, v, {}, 1);

  std::vector<double> flat;
  for (const auto& row : f.vectors) flat.insert(flat.end(), row.begin(), row.end());
  DiffValue feats = constant(Tensor::matrix(2, f.dim, flat));

  Tape t;
  BoundModel bound = BoundModel::bind(t, m, false);
  std::mt19937_64 rng(4);
  DropoutCtx drop{&rng, cfg.dropout};
  DiffValue with = oracle_unary_forward(t, bound, feats, drop);
  DiffValue without = oracle_unary_forward(t, bound, feats, DropoutCtx{});
  CHECK(with.value.same_shape(without.value));
  bool differs = false;
  for (int i = 0; i < with.value.size(); ++i)
    if (with.value[i] != without.value[i]) differs = true;
  CHECK(differs);
}
