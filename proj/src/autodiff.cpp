#include "nfol/autodiff.hpp"

#include <cmath>
#include <utility>

namespace nfol {

namespace {

[[noreturn]] void shape_error(const std::string& what) {
  throw Error(ErrorKind::Shape, what);
}

bool broadcastable(const Tensor& a, const Tensor& b) {
  return a.same_shape(b) || a.is_scalar() || b.is_scalar();
}

// Elementwise kernel with scalar broadcast on either side.
template <class F>
Tensor ewise(const Tensor& a, const Tensor& b, F f, const char* name) {
  if (!broadcastable(a, b)) shape_error(std::string(name) + ": shape mismatch");
  const Tensor& shape = a.is_scalar() ? b : a;
  Tensor out = Tensor::zeros_like(shape);
  const int n = shape.size();
  for (int i = 0; i < n; ++i) {
    const double x = a.is_scalar() ? a.data[0] : a.data[i];
    const double y = b.is_scalar() ? b.data[0] : b.data[i];
    out.data[i] = f(x, y);
  }
  return out;
}

template <class F>
Tensor emap(const Tensor& a, F f) {
  Tensor out = Tensor::zeros_like(a);
  for (int i = 0; i < a.size(); ++i) out.data[i] = f(a.data[i]);
  return out;
}

// Accumulates an output-shaped gradient into an input that may have been a
// broadcast scalar.
void accum_reduced(Tensor& dst, const Tensor& g) {
  if (dst.same_shape(g)) {
    for (int i = 0; i < g.size(); ++i) dst.data[i] += g.data[i];
  } else if (dst.is_scalar()) {
    double s = 0.0;
    for (int i = 0; i < g.size(); ++i) s += g.data[i];
    dst.data[0] += s;
  } else {
    shape_error("gradient accumulation: shape mismatch");
  }
}

Tensor matmul_value(const Tensor& a, const Tensor& b) {
  if (a.rank != 2) shape_error("matmul: left operand must be a matrix");
  if (b.rank == 1) {
    if (a.cols != b.rows) shape_error("matmul: inner dimensions differ");
    Tensor out = Tensor::vector(a.rows, 0.0);
    for (int i = 0; i < a.rows; ++i) {
      double s = 0.0;
      const double* arow = a.data.data() + static_cast<size_t>(i) * a.cols;
      for (int k = 0; k < a.cols; ++k) s += arow[k] * b.data[k];
      out.data[i] = s;
    }
    return out;
  }
  if (b.rank != 2 || a.cols != b.rows) shape_error("matmul: inner dimensions differ");
  Tensor out = Tensor::matrix(a.rows, b.cols, 0.0);
  for (int i = 0; i < a.rows; ++i) {
    const double* arow = a.data.data() + static_cast<size_t>(i) * a.cols;
    double* orow = out.data.data() + static_cast<size_t>(i) * b.cols;
    for (int k = 0; k < a.cols; ++k) {
      const double aik = arow[k];
      if (aik == 0.0) continue;
      const double* brow = b.data.data() + static_cast<size_t>(k) * b.cols;
      for (int j = 0; j < b.cols; ++j) orow[j] += aik * brow[j];
    }
  }
  return out;
}

}  // namespace

// ---------------------------------------------------------------- Tensor --

Tensor Tensor::scalar(double v) {
  Tensor t;
  t.data[0] = v;
  return t;
}

Tensor Tensor::vector(std::vector<double> v) {
  Tensor t;
  t.rank = 1;
  t.rows = static_cast<int>(v.size());
  t.cols = 1;
  t.data = std::move(v);
  return t;
}

Tensor Tensor::vector(int n, double fill) {
  Tensor t;
  t.rank = 1;
  t.rows = n;
  t.cols = 1;
  t.data.assign(static_cast<size_t>(n), fill);
  return t;
}

Tensor Tensor::matrix(int r, int c, std::vector<double> v) {
  if (static_cast<int>(v.size()) != r * c)
    shape_error("matrix: data size does not match dimensions");
  Tensor t;
  t.rank = 2;
  t.rows = r;
  t.cols = c;
  t.data = std::move(v);
  return t;
}

Tensor Tensor::matrix(int r, int c, double fill) {
  Tensor t;
  t.rank = 2;
  t.rows = r;
  t.cols = c;
  t.data.assign(static_cast<size_t>(r) * c, fill);
  return t;
}

Tensor Tensor::zeros_like(const Tensor& o) {
  Tensor t;
  t.rank = o.rank;
  t.rows = o.rows;
  t.cols = o.cols;
  t.data.assign(o.data.size(), 0.0);
  return t;
}

double Tensor::scalar_value() const {
  if (rank != 0) shape_error("scalar_value: tensor is not rank 0");
  return data[0];
}

double sigmoid_value(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double softplus_value(double x) {
  return std::fmax(x, 0.0) + std::log1p(std::exp(-std::fabs(x)));
}

// ------------------------------------------------------------------ Tape --

DiffValue Tape::leaf(Tensor v, bool requires_grad) {
  Node n;
  n.op = Op::Leaf;
  n.requires_grad = requires_grad;
  n.value = v;
  nodes_.push_back(std::move(n));
  return DiffValue(std::move(v), static_cast<int>(nodes_.size()) - 1);
}

int Tape::emit(Op op, const std::vector<const DiffValue*>& ins, Tensor value,
               double a0, double a1, std::vector<int> idx) {
  Node n;
  n.op = op;
  n.inputs.reserve(ins.size());
  for (const DiffValue* in : ins) {
    int id = in->id;
    if (id < 0) {
      Node c;
      c.op = Op::Leaf;
      c.requires_grad = false;
      c.value = in->value;
      nodes_.push_back(std::move(c));
      id = static_cast<int>(nodes_.size()) - 1;
    }
    n.inputs.push_back(id);
    if (nodes_[id].requires_grad) n.requires_grad = true;
  }
  n.value = std::move(value);
  n.a0 = a0;
  n.a1 = a1;
  n.idx = std::move(idx);
  nodes_.push_back(std::move(n));
  return static_cast<int>(nodes_.size()) - 1;
}

namespace {

// Emits a node unless every operand is untracked, in which case the result
// stays a constant.
DiffValue wrap(Tape& t, Op op, const std::vector<const DiffValue*>& ins,
               Tensor value, double a0 = 0.0, double a1 = 0.0,
               std::vector<int> idx = {}) {
  bool tracked = false;
  for (const DiffValue* in : ins) tracked |= in->tracked();
  if (!tracked) return DiffValue(std::move(value), -1);
  Tensor copy = value;
  int id = t.emit(op, ins, std::move(copy), a0, a1, std::move(idx));
  return DiffValue(std::move(value), id);
}

}  // namespace

// ------------------------------------------------------------------- ops --

DiffValue add(Tape& t, const DiffValue& a, const DiffValue& b) {
  return wrap(t, Op::Add, {&a, &b},
              ewise(a.value, b.value, [](double x, double y) { return x + y; }, "add"));
}

DiffValue sub(Tape& t, const DiffValue& a, const DiffValue& b) {
  return wrap(t, Op::Sub, {&a, &b},
              ewise(a.value, b.value, [](double x, double y) { return x - y; }, "sub"));
}

DiffValue mul(Tape& t, const DiffValue& a, const DiffValue& b) {
  return wrap(t, Op::Mul, {&a, &b},
              ewise(a.value, b.value, [](double x, double y) { return x * y; }, "mul"));
}

DiffValue div(Tape& t, const DiffValue& a, const DiffValue& b) {
  return wrap(t, Op::Div, {&a, &b},
              ewise(a.value, b.value, [](double x, double y) { return x / y; }, "div"));
}

DiffValue matmul(Tape& t, const DiffValue& a, const DiffValue& b) {
  return wrap(t, Op::MatMul, {&a, &b}, matmul_value(a.value, b.value));
}

DiffValue add_row_vec(Tape& t, const DiffValue& m, const DiffValue& v) {
  const Tensor& mm = m.value;
  const Tensor& vv = v.value;
  if (mm.rank != 2 || vv.rank != 1 || vv.rows != mm.cols)
    shape_error("add_row_vec: expected (r x c) and (c)");
  Tensor out = mm;
  for (int i = 0; i < mm.rows; ++i)
    for (int j = 0; j < mm.cols; ++j) out.at(i, j) += vv.data[j];
  return wrap(t, Op::AddRowVec, {&m, &v}, std::move(out));
}

DiffValue pair_concat(Tape& t, const DiffValue& m) {
  const Tensor& x = m.value;
  if (x.rank != 2) shape_error("pair_concat: expected a matrix");
  const int n = x.rows, p = x.cols;
  Tensor out = Tensor::matrix(n * n, 2 * p, 0.0);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      double* orow = out.data.data() + static_cast<size_t>(i * n + j) * 2 * p;
      const double* xi = x.data.data() + static_cast<size_t>(i) * p;
      const double* xj = x.data.data() + static_cast<size_t>(j) * p;
      for (int k = 0; k < p; ++k) orow[k] = xi[k];
      for (int k = 0; k < p; ++k) orow[p + k] = xj[k];
    }
  return wrap(t, Op::PairConcat, {&m}, std::move(out));
}

DiffValue sigmoid(Tape& t, const DiffValue& x) {
  return wrap(t, Op::Sigmoid, {&x}, emap(x.value, sigmoid_value));
}

DiffValue softplus(Tape& t, const DiffValue& x) {
  return wrap(t, Op::Softplus, {&x}, emap(x.value, softplus_value));
}

DiffValue relu(Tape& t, const DiffValue& x) {
  return wrap(t, Op::Relu, {&x}, emap(x.value, [](double v) { return v > 0.0 ? v : 0.0; }));
}

DiffValue log(Tape& t, const DiffValue& x) {
  return wrap(t, Op::Log, {&x}, emap(x.value, [](double v) { return std::log(v); }));
}

DiffValue exp(Tape& t, const DiffValue& x) {
  return wrap(t, Op::Exp, {&x}, emap(x.value, [](double v) { return std::exp(v); }));
}

DiffValue clamp(Tape& t, const DiffValue& x, double lo, double hi) {
  if (!(lo <= hi)) throw Error(ErrorKind::Contract, "clamp: lo > hi");
  Tensor out = emap(x.value, [&](double v) { return std::fmin(std::fmax(v, lo), hi); });
  return wrap(t, Op::Clamp, {&x}, std::move(out), lo, hi);
}

DiffValue pow(Tape& t, const DiffValue& x, const DiffValue& p) {
  if (!p.value.is_scalar()) shape_error("pow: exponent must be a scalar");
  const double e = p.value.data[0];
  Tensor out = emap(x.value, [&](double v) { return std::pow(v, e); });
  return wrap(t, Op::Pow, {&x, &p}, std::move(out));
}

DiffValue sum(Tape& t, const DiffValue& x) {
  double s = 0.0;
  for (double v : x.value.data) s += v;
  return wrap(t, Op::Sum, {&x}, Tensor::scalar(s));
}

DiffValue dot(Tape& t, const DiffValue& a, const DiffValue& b) {
  if (a.value.rank != 1 || !a.value.same_shape(b.value))
    shape_error("dot: expected two vectors of equal length");
  double s = 0.0;
  for (int i = 0; i < a.value.size(); ++i) s += a.value.data[i] * b.value.data[i];
  return wrap(t, Op::Dot, {&a, &b}, Tensor::scalar(s));
}

DiffValue prod_all(Tape& t, const DiffValue& v) {
  if (v.value.rank > 1) shape_error("prod_all: expected a vector or scalar");
  double p = 1.0;
  for (double x : v.value.data) p *= x;
  return wrap(t, Op::ProdAll, {&v}, Tensor::scalar(p));
}

DiffValue prod_complement(Tape& t, const DiffValue& v) {
  if (v.value.rank > 1) shape_error("prod_complement: expected a vector or scalar");
  double p = 1.0;
  for (double x : v.value.data) p *= (1.0 - x);
  return wrap(t, Op::ProdComplement, {&v}, Tensor::scalar(p));
}

DiffValue concat(Tape& t, const std::vector<DiffValue>& xs) {
  if (xs.empty()) return constant(Tensor::vector(0, 0.0));
  int n = 0;
  for (const DiffValue& x : xs) {
    if (x.value.rank == 2) shape_error("concat: matrix operand");
    n += x.value.size();
  }
  Tensor out = Tensor::vector(n, 0.0);
  int at = 0;
  for (const DiffValue& x : xs)
    for (double v : x.value.data) out.data[at++] = v;
  std::vector<const DiffValue*> ins;
  ins.reserve(xs.size());
  for (const DiffValue& x : xs) ins.push_back(&x);
  return wrap(t, Op::Concat, ins, std::move(out));
}

DiffValue gather(Tape& t, const DiffValue& v, std::vector<int> idx) {
  if (v.value.rank != 1) shape_error("gather: expected a vector");
  Tensor out = Tensor::vector(static_cast<int>(idx.size()), 0.0);
  for (size_t k = 0; k < idx.size(); ++k) {
    if (idx[k] < 0 || idx[k] >= v.value.rows)
      throw Error(ErrorKind::Index, "gather: index out of range");
    out.data[k] = v.value.data[idx[k]];
  }
  return wrap(t, Op::Gather, {&v}, std::move(out), 0.0, 0.0, std::move(idx));
}

DiffValue row_of(Tape& t, const DiffValue& m, int i) {
  if (m.value.rank != 2) shape_error("row_of: expected a matrix");
  if (i < 0 || i >= m.value.rows) throw Error(ErrorKind::Index, "row_of: row out of range");
  Tensor out = Tensor::vector(m.value.cols, 0.0);
  for (int j = 0; j < m.value.cols; ++j) out.data[j] = m.value.at(i, j);
  return wrap(t, Op::RowOf, {&m}, std::move(out), 0.0, 0.0, {i});
}

DiffValue col_of(Tape& t, const DiffValue& m, int j) {
  if (m.value.rank != 2) shape_error("col_of: expected a matrix");
  if (j < 0 || j >= m.value.cols) throw Error(ErrorKind::Index, "col_of: column out of range");
  Tensor out = Tensor::vector(m.value.rows, 0.0);
  for (int i = 0; i < m.value.rows; ++i) out.data[i] = m.value.at(i, j);
  return wrap(t, Op::ColOf, {&m}, std::move(out), 0.0, 0.0, {j});
}

DiffValue reshape(Tape& t, const DiffValue& x, int rank, int rows, int cols) {
  if (rows * cols != x.value.size()) shape_error("reshape: element count changes");
  Tensor out = x.value;
  out.rank = rank;
  out.rows = rows;
  out.cols = cols;
  return wrap(t, Op::Reshape, {&x}, std::move(out), 0.0, 0.0,
              {x.value.rank, x.value.rows, x.value.cols});
}

DiffValue transpose(Tape& t, const DiffValue& m) {
  if (m.value.rank != 2) shape_error("transpose: expected a matrix");
  Tensor out = Tensor::matrix(m.value.cols, m.value.rows, 0.0);
  for (int i = 0; i < m.value.rows; ++i)
    for (int j = 0; j < m.value.cols; ++j) out.at(j, i) = m.value.at(i, j);
  return wrap(t, Op::Transpose, {&m}, std::move(out));
}

// -------------------------------------------------------------- backward --

std::vector<Tensor> Tape::backward(const DiffValue& root) {
  if (!root.tracked())
    throw Error(ErrorKind::Contract, "backward: root is not on the tape");
  if (root.value.rank != 0)
    throw Error(ErrorKind::Contract, "backward: root must be a scalar");

  std::vector<Tensor> grads(nodes_.size());
  for (size_t i = 0; i < nodes_.size(); ++i) grads[i] = Tensor::zeros_like(nodes_[i].value);
  grads[root.id].data[0] = 1.0;

  for (int id = root.id; id >= 0; --id) {
    const Node& n = nodes_[id];
    if (!n.requires_grad || n.op == Op::Leaf) continue;
    const Tensor& g = grads[id];

    auto in = [&](int k) -> const Node& { return nodes_[n.inputs[k]]; };
    auto gin = [&](int k) -> Tensor& { return grads[n.inputs[k]]; };
    auto wants = [&](int k) { return in(k).requires_grad; };

    switch (n.op) {
      case Op::Leaf:
        break;
      case Op::Add: {
        if (wants(0)) accum_reduced(gin(0), g);
        if (wants(1)) accum_reduced(gin(1), g);
        break;
      }
      case Op::Sub: {
        if (wants(0)) accum_reduced(gin(0), g);
        if (wants(1)) {
          Tensor neg = emap(g, [](double v) { return -v; });
          accum_reduced(gin(1), neg);
        }
        break;
      }
      case Op::Mul: {
        if (wants(0)) {
          Tensor d = ewise(g, in(1).value, [](double x, double y) { return x * y; }, "mul.bwd");
          accum_reduced(gin(0), d);
        }
        if (wants(1)) {
          Tensor d = ewise(g, in(0).value, [](double x, double y) { return x * y; }, "mul.bwd");
          accum_reduced(gin(1), d);
        }
        break;
      }
      case Op::Div: {
        const Tensor& b = in(1).value;
        if (wants(0)) {
          Tensor d = ewise(g, b, [](double x, double y) { return x / y; }, "div.bwd");
          accum_reduced(gin(0), d);
        }
        if (wants(1)) {
          Tensor d = ewise(g, n.value, [](double x, double o) { return x * o; }, "div.bwd");
          d = ewise(d, b, [](double x, double y) { return -x / y; }, "div.bwd");
          accum_reduced(gin(1), d);
        }
        break;
      }
      case Op::MatMul: {
        const Tensor& a = in(0).value;
        const Tensor& b = in(1).value;
        if (b.rank == 1) {
          if (wants(0)) {
            Tensor& da = gin(0);
            for (int i = 0; i < a.rows; ++i)
              for (int k = 0; k < a.cols; ++k) da.at(i, k) += g.data[i] * b.data[k];
          }
          if (wants(1)) {
            Tensor& db = gin(1);
            for (int i = 0; i < a.rows; ++i)
              for (int k = 0; k < a.cols; ++k) db.data[k] += a.at(i, k) * g.data[i];
          }
        } else {
          if (wants(0)) {
            Tensor& da = gin(0);
            for (int i = 0; i < a.rows; ++i)
              for (int k = 0; k < a.cols; ++k) {
                double s = 0.0;
                for (int j = 0; j < b.cols; ++j) s += g.at(i, j) * b.at(k, j);
                da.at(i, k) += s;
              }
          }
          if (wants(1)) {
            Tensor& db = gin(1);
            for (int k = 0; k < b.rows; ++k)
              for (int j = 0; j < b.cols; ++j) {
                double s = 0.0;
                for (int i = 0; i < a.rows; ++i) s += a.at(i, k) * g.at(i, j);
                db.at(k, j) += s;
              }
          }
        }
        break;
      }
      case Op::AddRowVec: {
        if (wants(0)) accum_reduced(gin(0), g);
        if (wants(1)) {
          Tensor& dv = gin(1);
          for (int i = 0; i < g.rows; ++i)
            for (int j = 0; j < g.cols; ++j) dv.data[j] += g.at(i, j);
        }
        break;
      }
      case Op::PairConcat: {
        if (wants(0)) {
          Tensor& dx = gin(0);
          const int nn = in(0).value.rows, p = in(0).value.cols;
          for (int i = 0; i < nn; ++i)
            for (int j = 0; j < nn; ++j) {
              const double* grow = g.data.data() + static_cast<size_t>(i * nn + j) * 2 * p;
              double* di = dx.data.data() + static_cast<size_t>(i) * p;
              double* dj = dx.data.data() + static_cast<size_t>(j) * p;
              for (int k = 0; k < p; ++k) di[k] += grow[k];
              for (int k = 0; k < p; ++k) dj[k] += grow[p + k];
            }
        }
        break;
      }
      case Op::Sigmoid: {
        if (wants(0)) {
          Tensor d = ewise(g, n.value, [](double x, double s) { return x * s * (1.0 - s); },
                           "sigmoid.bwd");
          accum_reduced(gin(0), d);
        }
        break;
      }
      case Op::Softplus: {
        if (wants(0)) {
          Tensor d = ewise(g, in(0).value,
                           [](double x, double v) { return x * sigmoid_value(v); },
                           "softplus.bwd");
          accum_reduced(gin(0), d);
        }
        break;
      }
      case Op::Relu: {
        if (wants(0)) {
          Tensor d = ewise(g, in(0).value,
                           [](double x, double v) { return v > 0.0 ? x : 0.0; }, "relu.bwd");
          accum_reduced(gin(0), d);
        }
        break;
      }
      case Op::Log: {
        if (wants(0)) {
          Tensor d = ewise(g, in(0).value, [](double x, double v) { return x / v; }, "log.bwd");
          accum_reduced(gin(0), d);
        }
        break;
      }
      case Op::Exp: {
        if (wants(0)) {
          Tensor d = ewise(g, n.value, [](double x, double e) { return x * e; }, "exp.bwd");
          accum_reduced(gin(0), d);
        }
        break;
      }
      case Op::Clamp: {
        if (wants(0)) {
          const Tensor& x = in(0).value;
          Tensor d = Tensor::zeros_like(g);
          for (int i = 0; i < g.size(); ++i)
            d.data[i] = (x.data[i] > n.a0 && x.data[i] < n.a1) ? g.data[i] : 0.0;
          accum_reduced(gin(0), d);
        }
        break;
      }
      case Op::Pow: {
        const Tensor& x = in(0).value;
        const double e = in(1).value.data[0];
        if (wants(0)) {
          Tensor d = Tensor::zeros_like(x);
          for (int i = 0; i < x.size(); ++i) {
            double slope = e * std::pow(x.data[i], e - 1.0);
            if (!std::isfinite(slope)) slope = 0.0;
            d.data[i] = g.data[i] * slope;
          }
          accum_reduced(gin(0), d);
        }
        if (wants(1)) {
          double s = 0.0;
          for (int i = 0; i < x.size(); ++i) {
            if (x.data[i] <= 0.0) continue;  // x^e ln x -> 0 as x -> 0+
            s += g.data[i] * n.value.data[i] * std::log(x.data[i]);
          }
          gin(1).data[0] += s;
        }
        break;
      }
      case Op::Sum: {
        if (wants(0)) {
          Tensor& d = gin(0);
          for (int i = 0; i < d.size(); ++i) d.data[i] += g.data[0];
        }
        break;
      }
      case Op::Dot: {
        if (wants(0)) {
          Tensor& d = gin(0);
          const Tensor& b = in(1).value;
          for (int i = 0; i < d.size(); ++i) d.data[i] += g.data[0] * b.data[i];
        }
        if (wants(1)) {
          Tensor& d = gin(1);
          const Tensor& a = in(0).value;
          for (int i = 0; i < d.size(); ++i) d.data[i] += g.data[0] * a.data[i];
        }
        break;
      }
      case Op::ProdAll:
      case Op::ProdComplement: {
        if (wants(0)) {
          const Tensor& x = in(0).value;
          const int m = x.size();
          const bool comp = n.op == Op::ProdComplement;
          std::vector<double> pre(m + 1, 1.0), suf(m + 1, 1.0);
          for (int i = 0; i < m; ++i) {
            const double v = comp ? 1.0 - x.data[i] : x.data[i];
            pre[i + 1] = pre[i] * v;
          }
          for (int i = m - 1; i >= 0; --i) {
            const double v = comp ? 1.0 - x.data[i] : x.data[i];
            suf[i] = suf[i + 1] * v;
          }
          Tensor& d = gin(0);
          for (int i = 0; i < m; ++i) {
            const double others = pre[i] * suf[i + 1];
            d.data[i] += g.data[0] * (comp ? -others : others);
          }
        }
        break;
      }
      case Op::Concat: {
        int at = 0;
        for (size_t k = 0; k < n.inputs.size(); ++k) {
          const int sz = in(static_cast<int>(k)).value.size();
          if (wants(static_cast<int>(k))) {
            Tensor& d = gin(static_cast<int>(k));
            for (int i = 0; i < sz; ++i) d.data[i] += g.data[at + i];
          }
          at += sz;
        }
        break;
      }
      case Op::Gather: {
        if (wants(0)) {
          Tensor& d = gin(0);
          for (size_t k = 0; k < n.idx.size(); ++k) d.data[n.idx[k]] += g.data[k];
        }
        break;
      }
      case Op::RowOf: {
        if (wants(0)) {
          Tensor& d = gin(0);
          const int i = n.idx[0];
          for (int j = 0; j < d.cols; ++j) d.at(i, j) += g.data[j];
        }
        break;
      }
      case Op::ColOf: {
        if (wants(0)) {
          Tensor& d = gin(0);
          const int j = n.idx[0];
          for (int i = 0; i < d.rows; ++i) d.at(i, j) += g.data[i];
        }
        break;
      }
      case Op::Reshape: {
        if (wants(0)) {
          Tensor& d = gin(0);
          for (int i = 0; i < d.size(); ++i) d.data[i] += g.data[i];
        }
        break;
      }
      case Op::Transpose: {
        if (wants(0)) {
          Tensor& d = gin(0);
          for (int i = 0; i < g.rows; ++i)
            for (int j = 0; j < g.cols; ++j) d.at(j, i) += g.at(i, j);
        }
        break;
      }
    }
  }
  return grads;
}

}  // namespace nfol
