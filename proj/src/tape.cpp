#include "gmeta/tape.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace gmeta::ad {
namespace {

void require(bool ok, Op op, const std::string& what) {
  if (!ok) throw std::invalid_argument(std::string(op_name(op)) + ": " + what);
}

void require_same_shape(const Tensor& a, const Tensor& b, Op op) {
  require(a.same_shape(b), op, "shape mismatch " + a.shape_string() + " vs " + b.shape_string());
}

template <typename F>
Tensor map(const Tensor& a, F f) {
  Tensor out(a.rows(), a.cols());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = f(a[i]);
  return out;
}

}  // namespace

const char* op_name(Op op) {
  switch (op) {
    case Op::Leaf: return "leaf";
    case Op::MatMul: return "matmul";
    case Op::Add: return "add";
    case Op::Sub: return "sub";
    case Op::Mul: return "mul";
    case Op::Scale: return "scale";
    case Op::Relu: return "relu";
    case Op::Indicator: return "indicator";
    case Op::Propagate: return "propagate";
    case Op::GatherRows: return "gather_rows";
    case Op::ScatterRows: return "scatter_rows";
    case Op::RowSum: return "row_sum";
    case Op::BroadcastCols: return "broadcast_cols";
    case Op::SumAll: return "sum_all";
    case Op::Fill: return "fill";
    case Op::Sqrt: return "sqrt";
    case Op::Recip: return "recip";
    case Op::Exp: return "exp";
    case Op::LogSoftmax: return "log_softmax";
    case Op::ClampMin: return "clamp_min";
    case Op::Reshape: return "reshape";
  }
  return "?";
}

Tensor SparseMatrix::to_dense() const {
  Tensor d(rows, cols);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t e = offsets[r]; e < offsets[r + 1]; ++e) d(r, indices[e]) += values[e];
  return d;
}

Var Tape::push(Node n) {
  if (n.op != Op::Leaf) {
    n.requires_grad = !grad_frozen_ && ((n.in0 != UINT32_MAX && nodes_[n.in0].requires_grad) ||
                                        (n.in1 != UINT32_MAX && nodes_[n.in1].requires_grad));
    n.value = evaluate(n);
  }
  if (!n.value.all_finite())
    throw NumericalError(std::string("non-finite value produced by ") + op_name(n.op));
  nodes_.push_back(std::move(n));
  return Var{static_cast<std::uint32_t>(nodes_.size() - 1)};
}

Var Tape::variable(Tensor value) {
  Node n;
  n.requires_grad = true;
  n.value = std::move(value);
  return push(std::move(n));
}

Var Tape::constant(Tensor value) {
  Node n;
  n.value = std::move(value);
  return push(std::move(n));
}

void Tape::set_value(Var leaf, Tensor value) {
  Node& n = nodes_.at(leaf.index);
  if (n.op != Op::Leaf) throw std::invalid_argument("set_value on a non-leaf node");
  if (!n.value.same_shape(value)) throw std::invalid_argument("set_value changes leaf shape");
  n.value = std::move(value);
}

void Tape::replay() {
  for (Node& n : nodes_) {
    if (n.op == Op::Leaf) continue;
    n.value = evaluate(n);
    if (!n.value.all_finite())
      throw NumericalError(std::string("non-finite value produced by ") + op_name(n.op));
  }
}

Tensor Tape::evaluate(const Node& n) const {
  const auto& k = kernels::active();
  const Tensor* a = n.in0 != UINT32_MAX ? &nodes_[n.in0].value : nullptr;
  const Tensor* b = n.in1 != UINT32_MAX ? &nodes_[n.in1].value : nullptr;
  switch (n.op) {
    case Op::Leaf:
      return n.value;
    case Op::MatMul: {
      const std::size_t m = n.flag0 ? a->cols() : a->rows();
      const std::size_t kk = n.flag0 ? a->rows() : a->cols();
      const std::size_t bk = n.flag1 ? b->cols() : b->rows();
      const std::size_t nn = n.flag1 ? b->rows() : b->cols();
      require(kk == bk, n.op, "inner dimensions " + a->shape_string() + " x " + b->shape_string());
      Tensor out(m, nn);
      k.gemm(n.flag0, n.flag1, m, nn, kk, a->data(), b->data(), out.data());
      return out;
    }
    case Op::Add:
    case Op::Sub:
    case Op::Mul: {
      require_same_shape(*a, *b, n.op);
      Tensor out(a->rows(), a->cols());
      auto fn = n.op == Op::Add ? k.add : n.op == Op::Sub ? k.sub : k.mul;
      fn(a->data(), b->data(), out.data(), a->size());
      return out;
    }
    case Op::Scale: {
      Tensor out(a->rows(), a->cols());
      k.scale(n.scalar, a->data(), out.data(), a->size());
      return out;
    }
    case Op::Relu:
      return map(*a, [](double x) { return x > 0.0 ? x : 0.0; });
    case Op::Indicator: {
      const double t = n.scalar;
      return map(*a, [t](double x) { return x > t ? 1.0 : 0.0; });
    }
    case Op::Propagate: {
      const SparseMatrix& s = *n.sparse;
      const std::size_t in_rows = n.flag0 ? s.rows : s.cols;
      require(a->rows() == in_rows, n.op, "operand has " + std::to_string(a->rows()) +
                                               " rows, adjacency expects " +
                                               std::to_string(in_rows));
      Tensor out(n.flag0 ? s.cols : s.rows, a->cols());
      k.spmm(s.view(), n.flag0, a->data(), a->cols(), out.data());
      return out;
    }
    case Op::GatherRows: {
      const auto& idx = *n.index;
      Tensor out(idx.size(), a->cols());
      for (std::size_t i = 0; i < idx.size(); ++i) {
        require(idx[i] < a->rows(), n.op, "row index out of range");
        auto src = a->row(idx[i]);
        std::copy(src.begin(), src.end(), out.row(i).begin());
      }
      return out;
    }
    case Op::ScatterRows: {
      const auto& idx = *n.index;
      require(idx.size() == a->rows(), n.op, "index length != operand rows");
      Tensor out(n.rows, a->cols());
      for (std::size_t i = 0; i < idx.size(); ++i) {
        require(idx[i] < n.rows, n.op, "row index out of range");
        k.axpy(1.0, a->row(i).data(), out.row(idx[i]).data(), a->cols());
      }
      return out;
    }
    case Op::RowSum: {
      Tensor out(a->rows(), 1);
      for (std::size_t r = 0; r < a->rows(); ++r) {
        double s = 0.0;
        for (double v : a->row(r)) s += v;
        out(r, 0) = s;
      }
      return out;
    }
    case Op::BroadcastCols: {
      require(a->cols() == 1, n.op, "operand must be a column");
      Tensor out(a->rows(), n.cols);
      for (std::size_t r = 0; r < a->rows(); ++r)
        std::fill(out.row(r).begin(), out.row(r).end(), (*a)(r, 0));
      return out;
    }
    case Op::SumAll: {
      double s = 0.0;
      for (double v : a->values()) s += v;
      return Tensor::scalar(s);
    }
    case Op::Fill:
      require(a->size() == 1, n.op, "operand must be a scalar");
      return Tensor(n.rows, n.cols, (*a)[0]);
    case Op::Sqrt: {
      const double eps = n.scalar;
      return map(*a, [eps](double x) { return std::sqrt(x + eps); });
    }
    case Op::Recip:
      return map(*a, [](double x) { return 1.0 / x; });
    case Op::Exp:
      return map(*a, [](double x) { return std::exp(x); });
    case Op::LogSoftmax: {
      Tensor out(a->rows(), a->cols());
      for (std::size_t r = 0; r < a->rows(); ++r) {
        auto row = a->row(r);
        const double mx = *std::max_element(row.begin(), row.end());
        double s = 0.0;
        for (double v : row) s += std::exp(v - mx);
        const double lse = mx + std::log(s);
        for (std::size_t c = 0; c < row.size(); ++c) out(r, c) = row[c] - lse;
      }
      return out;
    }
    case Op::ClampMin: {
      const double lo = n.scalar;
      return map(*a, [lo](double x) { return x > lo ? x : lo; });
    }
    case Op::Reshape: {
      require(n.rows * n.cols == a->size(), n.op, "element count changes");
      return Tensor(n.rows, n.cols, std::vector<double>(a->values().begin(), a->values().end()));
    }
  }
  throw std::logic_error("unknown op");
}

Var Tape::matmul(Var a, Var b, bool trans_a, bool trans_b) {
  Node n;
  n.op = Op::MatMul;
  n.in0 = a.index;
  n.in1 = b.index;
  n.flag0 = trans_a;
  n.flag1 = trans_b;
  return push(std::move(n));
}

#define GMETA_BINARY(NAME, OP)     \
  Var Tape::NAME(Var a, Var b) {   \
    Node n;                        \
    n.op = Op::OP;                 \
    n.in0 = a.index;               \
    n.in1 = b.index;               \
    return push(std::move(n));     \
  }
GMETA_BINARY(add, Add)
GMETA_BINARY(sub, Sub)
GMETA_BINARY(mul, Mul)
#undef GMETA_BINARY

#define GMETA_UNARY(NAME, OP)    \
  Var Tape::NAME(Var a) {        \
    Node n;                      \
    n.op = Op::OP;               \
    n.in0 = a.index;             \
    return push(std::move(n));   \
  }
GMETA_UNARY(relu, Relu)
GMETA_UNARY(row_sum, RowSum)
GMETA_UNARY(sum_all, SumAll)
GMETA_UNARY(recip, Recip)
GMETA_UNARY(exp, Exp)
GMETA_UNARY(log_softmax_rows, LogSoftmax)
#undef GMETA_UNARY

Var Tape::scale(Var a, double factor) {
  Node n;
  n.op = Op::Scale;
  n.in0 = a.index;
  n.scalar = factor;
  return push(std::move(n));
}

Var Tape::indicator(Var a, double threshold) {
  Node n;
  n.op = Op::Indicator;
  n.in0 = a.index;
  n.scalar = threshold;
  Var v = push(std::move(n));
  nodes_[v.index].requires_grad = false;
  return v;
}

Var Tape::propagate(std::shared_ptr<const SparseMatrix> a, Var h, bool transpose) {
  if (!a) throw std::invalid_argument("propagate: null adjacency");
  Node n;
  n.op = Op::Propagate;
  n.in0 = h.index;
  n.flag0 = transpose;
  n.sparse = std::move(a);
  return push(std::move(n));
}

Var Tape::gather_rows(Var a, RowIndex rows) {
  Node n;
  n.op = Op::GatherRows;
  n.in0 = a.index;
  n.index = std::move(rows);
  return push(std::move(n));
}

Var Tape::scatter_rows(Var a, RowIndex rows, std::size_t out_rows) {
  Node n;
  n.op = Op::ScatterRows;
  n.in0 = a.index;
  n.index = std::move(rows);
  n.rows = out_rows;
  return push(std::move(n));
}

Var Tape::broadcast_cols(Var a, std::size_t cols) {
  Node n;
  n.op = Op::BroadcastCols;
  n.in0 = a.index;
  n.cols = cols;
  return push(std::move(n));
}

Var Tape::fill(Var scalar, std::size_t rows, std::size_t cols) {
  Node n;
  n.op = Op::Fill;
  n.in0 = scalar.index;
  n.rows = rows;
  n.cols = cols;
  return push(std::move(n));
}

Var Tape::sqrt(Var a, double eps) {
  Node n;
  n.op = Op::Sqrt;
  n.in0 = a.index;
  n.scalar = eps;
  return push(std::move(n));
}

Var Tape::clamp_min(Var a, double lo) {
  Node n;
  n.op = Op::ClampMin;
  n.in0 = a.index;
  n.scalar = lo;
  return push(std::move(n));
}

Var Tape::reshape(Var a, std::size_t rows, std::size_t cols) {
  Node n;
  n.op = Op::Reshape;
  n.in0 = a.index;
  n.rows = rows;
  n.cols = cols;
  return push(std::move(n));
}

void Tape::backprop(std::uint32_t i, Var g, std::vector<std::uint32_t>& adjoint,
                    const std::vector<char>& wanted) {
  // Copy what we need: emitting nodes may reallocate nodes_.
  const Node n = [&] {
    Node c;
    const Node& src = nodes_[i];
    c.op = src.op;
    c.in0 = src.in0;
    c.in1 = src.in1;
    c.flag0 = src.flag0;
    c.flag1 = src.flag1;
    c.scalar = src.scalar;
    c.index = src.index;
    c.sparse = src.sparse;
    return c;
  }();
  const Var a{n.in0}, b{n.in1}, y{i};
  const auto want = [&](Var v) { return v.valid() && wanted[v.index]; };
  const auto accumulate = [&](Var target, Var contribution) {
    std::uint32_t& slot = adjoint[target.index];
    slot = slot == UINT32_MAX ? contribution.index : add(Var{slot}, contribution).index;
  };
  const auto rows_of = [&](Var v) { return nodes_[v.index].value.rows(); };
  const auto cols_of = [&](Var v) { return nodes_[v.index].value.cols(); };

  switch (n.op) {
    case Op::Leaf:
    case Op::Indicator:
      return;
    case Op::MatMul:
      if (want(a))
        accumulate(a, n.flag0 ? matmul(b, g, n.flag1, true) : matmul(g, b, false, !n.flag1));
      if (want(b))
        accumulate(b, n.flag1 ? matmul(g, a, true, n.flag0) : matmul(a, g, !n.flag0, false));
      return;
    case Op::Add:
      if (want(a)) accumulate(a, g);
      if (want(b)) accumulate(b, g);
      return;
    case Op::Sub:
      if (want(a)) accumulate(a, g);
      if (want(b)) accumulate(b, scale(g, -1.0));
      return;
    case Op::Mul:
      if (want(a)) accumulate(a, mul(g, b));
      if (want(b)) accumulate(b, mul(g, a));
      return;
    case Op::Scale:
      if (want(a)) accumulate(a, scale(g, n.scalar));
      return;
    case Op::Relu:
      if (want(a)) accumulate(a, mul(g, indicator(a, 0.0)));
      return;
    case Op::Propagate:
      if (want(a)) accumulate(a, propagate(n.sparse, g, !n.flag0));
      return;
    case Op::GatherRows:
      if (want(a)) accumulate(a, scatter_rows(g, n.index, rows_of(a)));
      return;
    case Op::ScatterRows:
      if (want(a)) accumulate(a, gather_rows(g, n.index));
      return;
    case Op::RowSum:
      if (want(a)) accumulate(a, broadcast_cols(g, cols_of(a)));
      return;
    case Op::BroadcastCols:
      if (want(a)) accumulate(a, row_sum(g));
      return;
    case Op::SumAll:
      if (want(a)) accumulate(a, fill(g, rows_of(a), cols_of(a)));
      return;
    case Op::Fill:
      if (want(a)) accumulate(a, sum_all(g));
      return;
    case Op::Sqrt:
      if (want(a)) accumulate(a, mul(g, scale(recip(y), 0.5)));
      return;
    case Op::Recip:
      if (want(a)) accumulate(a, mul(g, scale(mul(y, y), -1.0)));
      return;
    case Op::Exp:
      if (want(a)) accumulate(a, mul(g, y));
      return;
    case Op::LogSoftmax:
      if (want(a)) accumulate(a, sub(g, mul(exp(y), broadcast_cols(row_sum(g), cols_of(a)))));
      return;
    case Op::ClampMin:
      if (want(a)) accumulate(a, mul(g, indicator(a, n.scalar)));
      return;
    case Op::Reshape:
      if (want(a)) accumulate(a, reshape(g, rows_of(a), cols_of(a)));
      return;
  }
}

std::vector<Var> Tape::gradient(Var loss, std::span<const Var> wrt, bool create_graph) {
  const Node& l = nodes_.at(loss.index);
  if (l.value.size() != 1)
    throw std::invalid_argument("gradient: loss must be a scalar, got " + l.value.shape_string());

  const std::uint32_t count = loss.index + 1;
  std::vector<char> wanted(count, 0);
  for (Var w : wrt)
    if (w.index < count && nodes_[w.index].requires_grad) wanted[w.index] = 1;
  for (std::uint32_t i = 0; i < count; ++i) {
    const Node& n = nodes_[i];
    if (wanted[i] || !n.requires_grad || n.op == Op::Leaf) continue;
    if ((n.in0 != UINT32_MAX && wanted[n.in0]) || (n.in1 != UINT32_MAX && wanted[n.in1]))
      wanted[i] = 1;
  }

  const bool saved = grad_frozen_;
  grad_frozen_ = saved || !create_graph;
  std::vector<std::uint32_t> adjoint(count, UINT32_MAX);
  std::vector<Var> out;
  try {
    if (wanted[loss.index]) {
      adjoint[loss.index] = constant(Tensor::scalar(1.0)).index;
      for (std::uint32_t i = count; i-- > 0;) {
        if (!wanted[i] || adjoint[i] == UINT32_MAX) continue;
        backprop(i, Var{adjoint[i]}, adjoint, wanted);
      }
    }
    out.reserve(wrt.size());
    for (Var w : wrt) {
      if (w.index < count && adjoint[w.index] != UINT32_MAX) {
        out.push_back(Var{adjoint[w.index]});
      } else {
        const Tensor& v = nodes_.at(w.index).value;
        out.push_back(constant(Tensor(v.rows(), v.cols())));
      }
    }
  } catch (...) {
    grad_frozen_ = saved;
    throw;
  }
  grad_frozen_ = saved;
  return out;
}

double relative_error(std::span<const double> a, std::span<const double> b, double floor) {
  if (a.size() != b.size()) throw std::invalid_argument("relative_error: length mismatch");
  double diff = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff += (a[i] - b[i]) * (a[i] - b[i]);
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  return std::sqrt(diff) / std::max({std::sqrt(na), std::sqrt(nb), floor});
}

}  // namespace gmeta::ad
