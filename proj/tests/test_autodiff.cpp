#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include <nfol/autodiff.hpp>

#include "test_util.hpp"

using namespace nfol;

namespace {

// Central finite difference of f at leaf index k of tensor x.
template <typename F>
double fd(F f, Tensor x, int k, double h = 1e-6) {
  Tensor hi = x, lo = x;
  hi[k] += h;
  lo[k] -= h;
  return (f(hi) - f(lo)) / (2.0 * h);
}

}  // namespace

TEST_CASE("tensor factories and accessors") {
  Tensor s = Tensor::scalar(3.5);
  CHECK(s.rank == 0);
  CHECK(s.size() == 1);
  CHECK(s.scalar_value() == 3.5);

  Tensor v = Tensor::vector({1.0, 2.0, 3.0});
  CHECK(v.rank == 1);
  CHECK(v.rows == 3);
  CHECK(v.cols == 1);
  CHECK(v[2] == 3.0);

  Tensor m = Tensor::matrix(2, 3, {1, 2, 3, 4, 5, 6});
  CHECK(m.rank == 2);
  CHECK(m.at(1, 2) == 6.0);
  CHECK(Tensor::zeros_like(m).same_shape(m));
  CHECK(Tensor::zeros_like(m)[0] == 0.0);

  CHECK_THROWS_AS(Tensor::matrix(2, 2, std::vector<double>{1.0}), Error);
  CHECK_THROWS_AS(v.scalar_value(), Error);
}

TEST_CASE("elementwise forward values and scalar broadcast") {
  Tape t;
  DiffValue a = t.leaf(Tensor::vector({1.0, 2.0}));
  DiffValue b = t.leaf(Tensor::vector({4.0, 8.0}));
  CHECK(add(t, a, b).value[1] == 10.0);
  CHECK(sub(t, a, b).value[0] == -3.0);
  CHECK(mul(t, a, b).value[1] == 16.0);
  CHECK(div(t, b, a).value[1] == 4.0);

  DiffValue s = t.leaf(Tensor::scalar(2.0));
  DiffValue r = mul(t, s, b);
  CHECK(r.value.rows == 2);
  CHECK(r.value[0] == 8.0);
  CHECK(add(t, b, s).value[1] == 10.0);

  DiffValue bad = t.leaf(Tensor::vector({1.0, 2.0, 3.0}));
  CHECK_KIND(add(t, a, bad), ErrorKind::Shape);
}

TEST_CASE("unary kernels match scalar helpers") {
  Tape t;
  DiffValue x = t.leaf(Tensor::vector({-2.0, 0.0, 3.0}));
  DiffValue sg = sigmoid(t, x);
  DiffValue sp = softplus(t, x);
  for (int i = 0; i < 3; ++i) {
    CHECK(sg.value[i] == sigmoid_value(x.value[i]));
    CHECK(sp.value[i] == softplus_value(x.value[i]));
  }
  CHECK(relu(t, x).value[0] == 0.0);
  CHECK(relu(t, x).value[2] == 3.0);

  DiffValue pos = t.leaf(Tensor::vector({0.5, 2.0}));
  CHECK(log(t, pos).value[1] == doctest::Approx(std::log(2.0)));
  CHECK(exp(t, pos).value[0] == doctest::Approx(std::exp(0.5)));
  CHECK(clamp(t, x, -1.0, 1.0).value[0] == -1.0);
  CHECK(clamp(t, x, -1.0, 1.0).value[2] == 1.0);

  DiffValue p = t.leaf(Tensor::scalar(1.7));
  CHECK(pow(t, pos, p).value[1] == doctest::Approx(std::pow(2.0, 1.7)));
}

TEST_CASE("matmul, add_row_vec, pair_concat layouts") {
  Tape t;
  DiffValue m = t.leaf(Tensor::matrix(2, 3, {1, 2, 3, 4, 5, 6}));
  DiffValue v = t.leaf(Tensor::vector({1.0, 0.0, -1.0}));
  DiffValue mv = matmul(t, m, v);
  CHECK(mv.value.rows == 2);
  CHECK(mv.value[0] == -2.0);
  CHECK(mv.value[1] == -2.0);

  DiffValue row = t.leaf(Tensor::vector({10.0, 20.0, 30.0}));
  DiffValue shifted = add_row_vec(t, m, row);
  CHECK(shifted.value.at(1, 2) == 36.0);

  DiffValue x = t.leaf(Tensor::matrix(2, 2, {1, 2, 3, 4}));
  DiffValue pc = pair_concat(t, x);
  CHECK(pc.value.rows == 4);
  CHECK(pc.value.cols == 4);
  // row i*n+j is [x_i | x_j]
  CHECK(pc.value.at(1, 0) == 1.0);
  CHECK(pc.value.at(1, 1) == 2.0);
  CHECK(pc.value.at(1, 2) == 3.0);
  CHECK(pc.value.at(1, 3) == 4.0);

  CHECK_KIND(matmul(t, m, x), ErrorKind::Shape);
}

TEST_CASE("reductions and structural ops") {
  Tape t;
  DiffValue v = t.leaf(Tensor::vector({0.5, 0.25, 0.5}));
  CHECK(sum(t, v).value.scalar_value() == 1.25);
  CHECK(dot(t, v, v).value.scalar_value() == doctest::Approx(0.5625));
  CHECK(prod_all(t, v).value.scalar_value() == 0.0625);
  CHECK(prod_complement(t, v).value.scalar_value() == doctest::Approx(0.1875));

  DiffValue empty = t.leaf(Tensor::vector(std::vector<double>{}));
  CHECK(prod_all(t, empty).value.scalar_value() == 1.0);
  CHECK(prod_complement(t, empty).value.scalar_value() == 1.0);

  DiffValue s = t.leaf(Tensor::scalar(2.0));
  DiffValue c = concat(t, {v, s});
  CHECK(c.value.rows == 4);
  CHECK(c.value[3] == 2.0);

  DiffValue g = gather(t, c, {3, 0});
  CHECK(g.value[0] == 2.0);
  CHECK(g.value[1] == 0.5);
  CHECK_KIND(gather(t, c, {4}), ErrorKind::Index);

  DiffValue m = t.leaf(Tensor::matrix(2, 3, {1, 2, 3, 4, 5, 6}));
  CHECK(row_of(t, m, 1).value[2] == 6.0);
  CHECK(col_of(t, m, 0).value[1] == 4.0);
  CHECK(transpose(t, m).value.at(2, 1) == 6.0);
  CHECK(reshape(t, m, 1, 6, 1).value[4] == 5.0);
  CHECK_KIND(reshape(t, m, 2, 4, 2), ErrorKind::Shape);
}

TEST_CASE("constants fold off the tape") {
  Tape t;
  DiffValue a = constant(Tensor::vector({0.5, 0.5}));
  DiffValue b = constant(2.0);
  DiffValue c = mul(t, a, b);
  CHECK_FALSE(c.tracked());
  CHECK(c.value[0] == 1.0);
  CHECK(t.size() == 0);

  // One tracked operand is enough to put the op on the tape.
  DiffValue leaf = t.leaf(Tensor::scalar(3.0));
  DiffValue d = mul(t, leaf, b);
  CHECK(d.tracked());
  CHECK(t.size() >= 2);
}

TEST_CASE("gradients of a composite match finite differences") {
  auto eval = [](const Tensor& xt) {
    Tape t;
    DiffValue x = t.leaf(xt);
    DiffValue y = sigmoid(t, x);
    DiffValue z = mul(t, y, sub(t, constant(1.0), y));
    DiffValue w = add(t, prod_all(t, z), dot(t, y, z));
    return pow(t, w, constant(0.7)).value.scalar_value();
  };

  Tensor x0 = Tensor::vector({0.3, -1.2, 0.8});
  Tape t;
  DiffValue x = t.leaf(x0);
  DiffValue y = sigmoid(t, x);
  DiffValue z = mul(t, y, sub(t, constant(1.0), y));
  DiffValue w = add(t, prod_all(t, z), dot(t, y, z));
  DiffValue r = pow(t, w, constant(0.7));
  std::vector<Tensor> grads = t.backward(r);

  for (int k = 0; k < 3; ++k) {
    double want = fd(eval, x0, k);
    double got = grads[x.id][k];
    CHECK(std::abs(got - want) / (std::abs(want) + 1e-8) < 1e-6);
  }
}

TEST_CASE("product gradients stay exact with zero entries") {
  Tape t;
  DiffValue v = t.leaf(Tensor::vector({0.5, 0.0, 0.25}));
  DiffValue p = prod_all(t, v);
  std::vector<Tensor> g = t.backward(p);
  CHECK(g[v.id][0] == 0.0);
  CHECK(g[v.id][1] == 0.125);  // 0.5 * 0.25
  CHECK(g[v.id][2] == 0.0);

  Tape t2;
  DiffValue u = t2.leaf(Tensor::vector({1.0, 0.5}));
  DiffValue q = prod_complement(t2, u);  // (1-1)*(1-0.5) = 0
  std::vector<Tensor> g2 = t2.backward(q);
  CHECK(g2[u.id][0] == -0.5);
  CHECK(g2[u.id][1] == 0.0);
}

TEST_CASE("backward is bit-identical across repeats") {
  auto run = [] {
    Tape t;
    DiffValue x = t.leaf(Tensor::vector({0.1, 0.7, 0.4, 0.9}));
    DiffValue y = softplus(t, mul(t, x, constant(3.0)));
    DiffValue r = sum(t, mul(t, y, prod_complement(t, x)));
    return t.backward(r)[x.id];
  };
  Tensor a = run();
  Tensor b = run();
  REQUIRE(a.size() == b.size());
  for (int i = 0; i < a.size(); ++i) CHECK(a[i] == b[i]);
}

TEST_CASE("backward ignores nodes the root does not reach") {
  Tape t;
  DiffValue x = t.leaf(Tensor::scalar(0.5));
  DiffValue unused = t.leaf(Tensor::scalar(0.9));
  DiffValue y = mul(t, x, x);
  std::vector<Tensor> g = t.backward(y);
  CHECK(g[x.id].scalar_value() == 1.0);
  CHECK(g[unused.id].scalar_value() == 0.0);
}
