#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include <nfol/calibration.hpp>
#include <nfol/vocab.hpp>

#include "test_util.hpp"

using namespace nfol;

TEST_CASE("identity parameters produce the identity map") {
  CalibParams id = CalibParams::identity();
  auto c = id.constrained();
  CHECK(c[0] == 1.0);
  CHECK(c[1] == 1.0);
  CHECK(c[2] == 0.5);
  CHECK(c[3] == 1.0);
  for (int k = 0; k <= 100; ++k) {
    double a = k / 100.0;
    CHECK(std::abs(calibrate_value(a, c[0], c[1], c[2], c[3]) - a) <= 1e-12);
  }
}

TEST_CASE("softplus inverse of one") {
  double r = softplus_inverse_one();
  CHECK(softplus_value(r) == 1.0);
}

TEST_CASE("pinned curve values") {
  CHECK(calibrate_value(0.25, 1, 1, 0.5, 1) == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(calibrate_value(0.5, 2, 2, 0.5, 1) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(calibrate_value(0.3, 2, 1, 0.5, 1) ==
        doctest::Approx(0.045 / 0.395).epsilon(1e-12));
}

TEST_CASE("endpoints are exact for arbitrary valid parameters") {
  double as[] = {0.3, 1.0, 2.5};
  double cs[] = {0.1, 0.5, 0.93};
  for (double a : as)
    for (double b : as)
      for (double c : cs)
        for (double d : as) {
          CHECK(calibrate_value(0.0, a, b, c, d) == 0.0);
          CHECK(calibrate_value(1.0, a, b, c, d) == 1.0);
        }
}

TEST_CASE("monotone in alpha") {
  double prev = -1.0;
  for (int k = 0; k <= 50; ++k) {
    double v = calibrate_value(k / 50.0, 1.7, 0.6, 0.35, 1.9);
    CHECK(v > prev);
    prev = v;
  }
}

TEST_CASE("excite curve lifts a sub-threshold value but stays linearly bounded") {
  // a = b = 1, c = 0.8, d = 0.5: slope at zero is c/(d(1-c)) = 8.
  double mid = calibrate_value(0.3, 1, 1, 0.8, 0.5);
  CHECK(mid > 0.5);
  for (double alpha : {1e-6, 1e-5, 1e-4, 1e-3})
    CHECK(calibrate_value(alpha, 1, 1, 0.8, 0.5) <= 10.0 * alpha);
}

TEST_CASE("tape calibrate agrees with the scalar map") {
  Tape t;
  DiffValue alpha = t.leaf(Tensor::vector({0.05, 0.3, 0.77, 0.99}));
  DiffValue out = calibrate(t, alpha, constant(1.7), constant(0.6),
                            constant(0.35), constant(1.9), ExecMode::Exact);
  for (int i = 0; i < 4; ++i)
    CHECK(out.value[i] ==
          doctest::Approx(calibrate_value(alpha.value[i], 1.7, 0.6, 0.35, 1.9))
              .epsilon(1e-15));
}

TEST_CASE("raw calibrate applies the reparameterization") {
  CalibParams p;
  p.raw_a = 0.4;
  p.raw_b = -0.2;
  p.raw_c = 0.9;
  p.raw_d = 0.1;
  auto c = p.constrained();
  CHECK(c[0] == softplus_value(0.4));
  CHECK(c[2] == sigmoid_value(0.9));

  Tape t;
  DiffValue alpha = t.leaf(Tensor::scalar(0.42));
  DiffValue raw = calibrate_raw(t, alpha, constant(p.raw_a), constant(p.raw_b),
                                constant(p.raw_c), constant(p.raw_d), ExecMode::Exact);
  CHECK(raw.value.scalar_value() ==
        doctest::Approx(calibrate_value(0.42, c[0], c[1], c[2], c[3])).epsilon(1e-15));
}

TEST_CASE("training mode keeps gradients finite at the endpoints") {
  Tape t;
  DiffValue alpha = t.leaf(Tensor::vector({0.0, 1.0}));
  DiffValue out = calibrate(t, alpha, constant(0.5), constant(2.0),
                            constant(0.3), constant(1.0), ExecMode::Training);
  DiffValue loss = sum(t, out);
  std::vector<Tensor> g = t.backward(loss);
  CHECK(std::isfinite(g[alpha.id][0]));
  CHECK(std::isfinite(g[alpha.id][1]));
}

TEST_CASE("context table lookup and json round trip") {
  ConceptVocabulary v = default_vocabulary();
  ContextTable table;
  table.vocab_hash = v.hash();
  table.defaults = CalibParams::identity();
  CalibParams p;
  p.raw_a = 0.25;
  p.raw_b = -0.5;
  p.raw_c = 1.5;
  p.raw_d = 0.75;
  std::string key = ContextTable::make_key("red", 2);
  table.entries[key] = p;

  CHECK(table.lookup(key).raw_a == 0.25);
  CHECK(table.lookup("chair@0").raw_a == table.defaults.raw_a);

  std::string text = table.to_json_text();
  ContextTable back = ContextTable::from_json_text(text);
  CHECK(back.vocab_hash == table.vocab_hash);
  CHECK(back.to_json_text() == text);
  CHECK(back.lookup(key).raw_c == 1.5);

  Tape t;
  DiffValue alpha = t.leaf(Tensor::scalar(0.6));
  DiffValue via_apply = back.apply(t, key, alpha, ExecMode::Exact);
  auto c = p.constrained();
  CHECK(via_apply.value.scalar_value() ==
        doctest::Approx(calibrate_value(0.6, c[0], c[1], c[2], c[3])).epsilon(1e-15));

  CHECK_KIND(ContextTable::from_json_text("{bad"), ErrorKind::Data);
}
