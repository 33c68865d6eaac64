#pragma once

// Reverse-mode automatic differentiation over dense f64 matrices.
//
// Operations execute eagerly and are appended to a Tape. Tape::gradient
// walks the record backwards and emits the adjoint computation as new tape
// operations, so gradients are themselves differentiable: differentiating a
// loss evaluated after inner SGD steps back to the initial parameters yields
// exact second-order meta-gradients.

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "gmeta/kernels.hpp"
#include "gmeta/tensor.hpp"

namespace gmeta::ad {

/// Handle to a value recorded on a Tape.
struct Var {
  std::uint32_t index = UINT32_MAX;
  bool valid() const { return index != UINT32_MAX; }
  friend bool operator==(Var, Var) = default;
};

/// Thrown when an operation produces NaN or Inf.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Constant sparse matrix (CSR) used as the left operand of propagate().
struct SparseMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<std::size_t> offsets{0};
  std::vector<std::uint32_t> indices;
  std::vector<double> values;

  kernels::CsrView view() const { return {rows, cols, offsets, indices, values}; }
  Tensor to_dense() const;
};

using RowIndex = std::shared_ptr<const std::vector<std::uint32_t>>;

enum class Op : std::uint8_t {
  Leaf,
  MatMul,
  Add,
  Sub,
  Mul,
  Scale,
  Relu,
  Indicator,
  Propagate,
  GatherRows,
  ScatterRows,
  RowSum,
  BroadcastCols,
  SumAll,
  Fill,
  Sqrt,
  Recip,
  Exp,
  LogSoftmax,
  ClampMin,
  Reshape,
};

const char* op_name(Op op);

class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;
  Tape(Tape&&) = default;
  Tape& operator=(Tape&&) = default;

  Var variable(Tensor value);
  Var constant(Tensor value);

  const Tensor& value(Var v) const { return nodes_.at(v.index).value; }
  Op op(Var v) const { return nodes_.at(v.index).op; }
  bool requires_grad(Var v) const { return nodes_.at(v.index).requires_grad; }
  std::size_t size() const { return nodes_.size(); }

  /// Overwrite a leaf; call replay() to refresh dependent values.
  void set_value(Var leaf, Tensor value);
  /// Recompute every non-leaf value in record order.
  void replay();

  // c = op(a) * op(b)
  Var matmul(Var a, Var b, bool trans_a = false, bool trans_b = false);
  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);  // elementwise
  Var scale(Var a, double factor);
  Var relu(Var a);
  /// 1 where a > threshold, else 0. Carries no gradient.
  Var indicator(Var a, double threshold);
  /// a * h (or a^T * h) for a constant sparse a.
  Var propagate(std::shared_ptr<const SparseMatrix> a, Var h, bool transpose = false);
  Var gather_rows(Var a, RowIndex rows);
  /// Inverse of gather_rows: out has `out_rows` rows, row index[i] += a[i].
  Var scatter_rows(Var a, RowIndex rows, std::size_t out_rows);
  Var row_sum(Var a);                            // r x c -> r x 1
  Var broadcast_cols(Var a, std::size_t cols);   // r x 1 -> r x cols
  Var sum_all(Var a);                            // -> 1 x 1
  Var fill(Var scalar, std::size_t rows, std::size_t cols);
  Var sqrt(Var a, double eps = 0.0);             // sqrt(a + eps)
  Var recip(Var a);
  Var exp(Var a);
  Var log_softmax_rows(Var a);
  Var clamp_min(Var a, double lo);
  Var reshape(Var a, std::size_t rows, std::size_t cols);

  /// Gradients of scalar `loss` with respect to each of `wrt`. With
  /// create_graph the returned Vars are differentiable functions of the
  /// tape's variables; otherwise they are constants. Inputs the loss does not
  /// depend on get zero tensors.
  std::vector<Var> gradient(Var loss, std::span<const Var> wrt, bool create_graph = true);

 private:
  struct Node {
    Op op = Op::Leaf;
    std::uint32_t in0 = UINT32_MAX;
    std::uint32_t in1 = UINT32_MAX;
    bool requires_grad = false;
    bool flag0 = false;  // matmul trans_a, propagate transpose
    bool flag1 = false;  // matmul trans_b
    double scalar = 0.0;
    std::size_t rows = 0;  // target shape for fill/reshape/scatter
    std::size_t cols = 0;
    RowIndex index;
    std::shared_ptr<const SparseMatrix> sparse;
    Tensor value;
  };

  Var push(Node node);
  Tensor evaluate(const Node& n) const;
  const Node& node(Var v) const { return nodes_.at(v.index); }
  void backprop(std::uint32_t i, Var upstream, std::vector<std::uint32_t>& adjoint,
                const std::vector<char>& wanted);

  std::vector<Node> nodes_;
  bool grad_frozen_ = false;  // true while emitting a non-differentiable backward pass
};

/// Norm-wise relative error ||a - b|| / max(||a||, ||b||, floor).
double relative_error(std::span<const double> a, std::span<const double> b, double floor = 1e-12);

}  // namespace gmeta::ad
