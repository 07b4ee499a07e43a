#pragma once

#include <cstdint>
#include <vector>

#include "nfol/error.hpp"

namespace nfol {

// Dense tensor of rank 0..2. Rank 0 is a scalar (1x1), rank 1 a column
// vector (rows x 1), rank 2 a row-major matrix.
struct Tensor {
  int rank = 0;
  int rows = 1;
  int cols = 1;
  std::vector<double> data;

  Tensor() : data(1, 0.0) {}

  static Tensor scalar(double v);
  static Tensor vector(std::vector<double> v);
  static Tensor vector(int n, double fill);
  static Tensor matrix(int r, int c, std::vector<double> v);
  static Tensor matrix(int r, int c, double fill);
  static Tensor zeros_like(const Tensor& t);

  int size() const { return rows * cols; }
  bool same_shape(const Tensor& o) const {
    return rank == o.rank && rows == o.rows && cols == o.cols;
  }
  bool is_scalar() const { return rank == 0; }

  double& operator[](int i) { return data[i]; }
  double operator[](int i) const { return data[i]; }
  double& at(int i, int j) { return data[i * cols + j]; }
  double at(int i, int j) const { return data[i * cols + j]; }
  double scalar_value() const;
};

enum class Op : uint8_t {
  Leaf,
  Add, Sub, Mul, Div,
  MatMul, AddRowVec, PairConcat,
  Sigmoid, Softplus, Relu, Log, Exp, Clamp, Pow,
  Sum, Dot, ProdAll, ProdComplement,
  Concat, Gather, RowOf, ColOf, Reshape, Transpose,
};

struct Node {
  Op op = Op::Leaf;
  bool requires_grad = false;
  std::vector<int> inputs;  // node ids
  Tensor value;
  double a0 = 0.0, a1 = 0.0;  // clamp bounds
  std::vector<int> idx;       // gather indices; row/col index; reshape dims
};

// Exact mode evaluates products and powers directly; gradient checks and the
// scalar reference agree with it to machine precision. Training mode guards
// the same computations (log-space products, probabilities clamped away from
// 0 and 1) so gradients stay finite under saturation.
enum class ExecMode { Exact, Training };

// A value that may participate in differentiation. id < 0 means the value is
// a plain constant and lives off the tape; ops whose inputs are all constants
// fold to constants, so evaluation-only code paths never grow a tape.
struct DiffValue {
  Tensor value;
  int id = -1;

  DiffValue() = default;
  explicit DiffValue(Tensor t) : value(std::move(t)) {}
  DiffValue(Tensor t, int node_id) : value(std::move(t)), id(node_id) {}
  bool tracked() const { return id >= 0; }
};

inline DiffValue constant(Tensor t) { return DiffValue(std::move(t), -1); }
inline DiffValue constant(double v) { return DiffValue(Tensor::scalar(v), -1); }

// Records the forward graph of one evaluation; one tape per evaluation, no
// sharing across threads. backward() walks the node list in reverse and
// returns one gradient tensor per node (zero for nodes the root does not
// reach). Two identical forward+backward passes are bit-identical.
class Tape {
 public:
  DiffValue leaf(Tensor v, bool requires_grad = true);

  std::vector<Tensor> backward(const DiffValue& root);

  const Node& node(int id) const { return nodes_[id]; }
  size_t size() const { return nodes_.size(); }
  void clear() { nodes_.clear(); }

  // Internal: appends a node, materializing constant operands as non-grad
  // leaves so backward can read their values.
  int emit(Op op, const std::vector<const DiffValue*>& ins, Tensor value,
           double a0 = 0.0, double a1 = 0.0, std::vector<int> idx = {});

 private:
  std::vector<Node> nodes_;
};

// Elementwise ops broadcast a rank-0 operand against any shape.
DiffValue add(Tape& t, const DiffValue& a, const DiffValue& b);
DiffValue sub(Tape& t, const DiffValue& a, const DiffValue& b);
DiffValue mul(Tape& t, const DiffValue& a, const DiffValue& b);
DiffValue div(Tape& t, const DiffValue& a, const DiffValue& b);

DiffValue matmul(Tape& t, const DiffValue& a, const DiffValue& b);
DiffValue add_row_vec(Tape& t, const DiffValue& m, const DiffValue& v);
// (n x p) -> (n*n x 2p); row i*n+j is [x_i | x_j].
DiffValue pair_concat(Tape& t, const DiffValue& m);

DiffValue sigmoid(Tape& t, const DiffValue& x);
DiffValue softplus(Tape& t, const DiffValue& x);
DiffValue relu(Tape& t, const DiffValue& x);
DiffValue log(Tape& t, const DiffValue& x);
DiffValue exp(Tape& t, const DiffValue& x);
DiffValue clamp(Tape& t, const DiffValue& x, double lo, double hi);
// Elementwise x^p with scalar exponent p; differentiable in both arguments
// for x > 0 (the only regime the engine uses it in).
DiffValue pow(Tape& t, const DiffValue& x, const DiffValue& p);

DiffValue sum(Tape& t, const DiffValue& x);
DiffValue dot(Tape& t, const DiffValue& a, const DiffValue& b);
// prod_all(v)        = prod_i v_i
// prod_complement(v) = prod_i (1 - v_i); the existential/negated-existential
// aggregators are 1 - prod_complement and prod_complement respectively.
// Both return 1.0 on empty input. Gradients use prefix/suffix products, so
// zero entries are handled exactly (no division).
DiffValue prod_all(Tape& t, const DiffValue& v);
DiffValue prod_complement(Tape& t, const DiffValue& v);

// Concatenates rank-0/rank-1 values into one vector.
DiffValue concat(Tape& t, const std::vector<DiffValue>& xs);
DiffValue gather(Tape& t, const DiffValue& v, std::vector<int> idx);
DiffValue row_of(Tape& t, const DiffValue& m, int i);
DiffValue col_of(Tape& t, const DiffValue& m, int j);
DiffValue reshape(Tape& t, const DiffValue& x, int rank, int rows, int cols);
DiffValue transpose(Tape& t, const DiffValue& m);

// Stable scalar helpers shared by kernels and plain-double code.
double sigmoid_value(double x);
double softplus_value(double x);

}  // namespace nfol
