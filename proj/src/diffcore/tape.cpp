// Copyright 2026 The fail-lab Authors
// SPDX-License-Identifier: Apache-2.0

#include "faillab/diffcore/tape.hpp"

#include <algorithm>
#include <cmath>

#include "faillab/diffcore/kernels.hpp"

namespace faillab::diff {

const Matrix& Var::value() const {
  if (tape == nullptr) throw ContractViolation("use of an unbound Var");
  return tape->value(*this);
}

const char* op_name(Op op) {
  switch (op) {
    case Op::kConstant: return "constant";
    case Op::kParam: return "param";
    case Op::kAffine: return "affine";
    case Op::kAdd: return "add";
    case Op::kSub: return "sub";
    case Op::kMul: return "mul";
    case Op::kScale: return "scale";
    case Op::kAddScalar: return "add_scalar";
    case Op::kTanh: return "tanh";
    case Op::kRelu: return "relu";
    case Op::kSigmoid: return "sigmoid";
    case Op::kLog: return "log";
    case Op::kExp: return "exp";
    case Op::kSquare: return "square";
    case Op::kSoftplus: return "softplus";
    case Op::kSum: return "sum";
    case Op::kMean: return "mean";
    case Op::kRowSum: return "row_sum";
    case Op::kSegmentMean: return "segment_mean";
    case Op::kL2Norm: return "l2_norm";
    case Op::kConcatCols: return "concat_cols";
    case Op::kGatherRows: return "gather_rows";
    case Op::kMinimum: return "minimum";
    case Op::kClamp: return "clamp";
  }
  return "unknown";
}

double softplus(double z) { return std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z))); }

double sigmoid(double z) {
  return z >= 0.0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
}

Var Tape::constant(Matrix value) {
  Node n;
  n.op = Op::kConstant;
  n.value = std::move(value);
  return push(std::move(n));
}

Var Tape::param(Matrix value) {
  Node n;
  n.op = Op::kParam;
  n.value = std::move(value);
  n.requires_grad = true;
  return push(std::move(n));
}

Var Tape::push(Node node) {
  for (std::size_t in : node.inputs) {
    if (in >= nodes_.size()) throw ContractViolation("node input recorded out of order");
    node.requires_grad = node.requires_grad || nodes_[in].requires_grad;
  }
  nodes_.push_back(std::move(node));
  return Var{this, nodes_.size() - 1};
}

GradientMap Tape::backward(Var loss) {
  if (loss.tape != this) throw ContractViolation("loss belongs to a different tape");
  const Node& root = nodes_.at(loss.id);
  if (root.value.rows() != 1 || root.value.cols() != 1) {
    throw ContractViolation("backward requires a scalar loss, got " +
                            root.value.shape_string());
  }
  for (std::size_t i = 0; i <= loss.id; ++i) {
    Node& n = nodes_[i];
    n.adjoint = n.requires_grad ? Matrix(n.value.rows(), n.value.cols()) : Matrix();
  }
  for (std::size_t i = loss.id + 1; i < nodes_.size(); ++i) nodes_[i].adjoint = Matrix();
  if (!root.requires_grad) {
    // Nothing upstream is a parameter; the loss adjoint is still defined.
    nodes_[loss.id].adjoint = Matrix::scalar(1.0);
  } else {
    nodes_[loss.id].adjoint[0] = 1.0;
  }

  for (std::size_t i = loss.id + 1; i-- > 0;) {
    if (!nodes_[i].requires_grad || nodes_[i].inputs.empty()) continue;
    if (!nodes_[i].adjoint.all_finite()) {
      throw NumericalError(std::string("non-finite adjoint at ") + op_name(nodes_[i].op) +
                           " node " + std::to_string(i));
    }
    propagate(i);
  }

  GradientMap grads;
  for (std::size_t i = 0; i <= loss.id; ++i) {
    if (nodes_[i].op != Op::kParam) continue;
    if (!nodes_[i].adjoint.all_finite()) {
      throw NumericalError("non-finite gradient for parameter node " + std::to_string(i));
    }
    grads.emplace(i, nodes_[i].adjoint);
  }
  return grads;
}

std::vector<Matrix> Tape::gradients(std::span<const Var> vars) const {
  std::vector<Matrix> out;
  out.reserve(vars.size());
  for (const Var& v : vars) {
    const Node& n = nodes_.at(v.id);
    out.push_back(n.adjoint.same_shape(n.value) ? n.adjoint
                                                : Matrix(n.value.rows(), n.value.cols()));
  }
  return out;
}

namespace {

// Adds g (full broadcast shape) into target, summing over broadcast dimensions.
void accumulate_reduced(Matrix& target, const Matrix& g, double factor = 1.0) {
  const std::size_t tr = target.rows();
  const std::size_t tc = target.cols();
  for (std::size_t r = 0; r < g.rows(); ++r) {
    const std::size_t rr = tr == 1 ? 0 : r;
    for (std::size_t c = 0; c < g.cols(); ++c) {
      target(rr, tc == 1 ? 0 : c) += factor * g(r, c);
    }
  }
}

std::size_t broadcast_dim(std::size_t a, std::size_t b, const char* what) {
  if (a == b || b == 1) return a;
  if (a == 1) return b;
  throw ConfigurationError(std::string("cannot broadcast ") + what + " " + std::to_string(a) +
                           " against " + std::to_string(b));
}

template <typename F>
Matrix broadcast_apply(const Matrix& a, const Matrix& b, F f) {
  const std::size_t rows = broadcast_dim(a.rows(), b.rows(), "rows");
  const std::size_t cols = broadcast_dim(a.cols(), b.cols(), "cols");
  Matrix out(rows, cols);
  for (std::size_t r = 0; r < rows; ++r) {
    const std::size_t ra = a.rows() == 1 ? 0 : r;
    const std::size_t rb = b.rows() == 1 ? 0 : r;
    for (std::size_t c = 0; c < cols; ++c) {
      out(r, c) = f(a(ra, a.cols() == 1 ? 0 : c), b(rb, b.cols() == 1 ? 0 : c));
    }
  }
  return out;
}

// Value of `m` at broadcast position (r, c).
double at(const Matrix& m, std::size_t r, std::size_t c) {
  return m(m.rows() == 1 ? 0 : r, m.cols() == 1 ? 0 : c);
}

template <typename F>
Matrix map(const Matrix& a, F f) {
  Matrix out = a;
  for (double& v : out.values()) v = f(v);
  return out;
}

Tape& tape_of(Var a) {
  if (a.tape == nullptr) throw ContractViolation("use of an unbound Var");
  return *a.tape;
}

Tape& tape_of(Var a, Var b) {
  if (a.tape != b.tape) throw ContractViolation("operands recorded on different tapes");
  return tape_of(a);
}

Var unary(Op op, Var a, Matrix value, double pa = 0.0, double pb = 0.0) {
  Tape::Node n;
  n.op = op;
  n.inputs = {a.id};
  n.value = std::move(value);
  n.a = pa;
  n.b = pb;
  return tape_of(a).push(std::move(n));
}

Var binary(Op op, Var a, Var b, Matrix value) {
  Tape& t = tape_of(a, b);
  Tape::Node n;
  n.op = op;
  n.inputs = {a.id, b.id};
  n.value = std::move(value);
  return t.push(std::move(n));
}

}  // namespace

void Tape::propagate(std::size_t id) {
  const Node& n = nodes_[id];
  const Matrix& g = n.adjoint;
  auto in = [&](std::size_t k) -> Node& { return nodes_[n.inputs[k]]; };
  auto wants = [&](std::size_t k) { return in(k).requires_grad; };

  switch (n.op) {
    case Op::kConstant:
    case Op::kParam:
      return;
    case Op::kAffine: {
      const Matrix& x = in(0).value;
      const Matrix& w = in(1).value;
      if (wants(0)) accumulate_reduced(in(0).adjoint, kernels::matmul(g, w));
      if (wants(1)) accumulate_reduced(in(1).adjoint, kernels::matmul_tn(g, x));
      if (wants(2)) accumulate_reduced(in(2).adjoint, g);
      return;
    }
    case Op::kAdd:
      if (wants(0)) accumulate_reduced(in(0).adjoint, g);
      if (wants(1)) accumulate_reduced(in(1).adjoint, g);
      return;
    case Op::kSub:
      if (wants(0)) accumulate_reduced(in(0).adjoint, g);
      if (wants(1)) accumulate_reduced(in(1).adjoint, g, -1.0);
      return;
    case Op::kMul: {
      const Matrix& av = in(0).value;
      const Matrix& bv = in(1).value;
      if (wants(0)) {
        Matrix ga(g.rows(), g.cols());
        for (std::size_t r = 0; r < g.rows(); ++r)
          for (std::size_t c = 0; c < g.cols(); ++c) ga(r, c) = g(r, c) * at(bv, r, c);
        accumulate_reduced(in(0).adjoint, ga);
      }
      if (wants(1)) {
        Matrix gb(g.rows(), g.cols());
        for (std::size_t r = 0; r < g.rows(); ++r)
          for (std::size_t c = 0; c < g.cols(); ++c) gb(r, c) = g(r, c) * at(av, r, c);
        accumulate_reduced(in(1).adjoint, gb);
      }
      return;
    }
    default:
      break;
  }

  // Remaining ops are unary (or n-ary without broadcasting).
  Node& x = in(0);
  if (n.op == Op::kConcatCols) {
    std::size_t offset = 0;
    for (std::size_t k = 0; k < n.inputs.size(); ++k) {
      Node& part = in(k);
      const std::size_t w = part.value.cols();
      if (part.requires_grad) {
        for (std::size_t r = 0; r < g.rows(); ++r)
          for (std::size_t c = 0; c < w; ++c) part.adjoint(r, c) += g(r, offset + c);
      }
      offset += w;
    }
    return;
  }
  if (n.op == Op::kMinimum) {
    Node& y = in(1);
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (x.value[i] <= y.value[i]) {
        if (x.requires_grad) x.adjoint[i] += g[i];
      } else if (y.requires_grad) {
        y.adjoint[i] += g[i];
      }
    }
    return;
  }
  if (!x.requires_grad) return;
  Matrix& gx = x.adjoint;
  const Matrix& xv = x.value;
  const Matrix& yv = n.value;

  switch (n.op) {
    case Op::kScale:
      for (std::size_t i = 0; i < g.size(); ++i) gx[i] += n.a * g[i];
      break;
    case Op::kAddScalar:
      for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
      break;
    case Op::kTanh:
      for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * (1.0 - yv[i] * yv[i]);
      break;
    case Op::kRelu:
      for (std::size_t i = 0; i < g.size(); ++i) gx[i] += xv[i] > 0.0 ? g[i] : 0.0;
      break;
    case Op::kSigmoid:
      for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * yv[i] * (1.0 - yv[i]);
      break;
    case Op::kLog:
      for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] / xv[i];
      break;
    case Op::kExp:
      for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * yv[i];
      break;
    case Op::kSquare:
      for (std::size_t i = 0; i < g.size(); ++i) gx[i] += 2.0 * xv[i] * g[i];
      break;
    case Op::kSoftplus:
      for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * sigmoid(xv[i]);
      break;
    case Op::kSum:
      for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += g[0];
      break;
    case Op::kMean: {
      const double s = g[0] / static_cast<double>(gx.size());
      for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += s;
      break;
    }
    case Op::kRowSum:
      for (std::size_t r = 0; r < gx.rows(); ++r)
        for (std::size_t c = 0; c < gx.cols(); ++c) gx(r, c) += g[r] * n.a;
      break;
    case Op::kSegmentMean: {
      const double inv = 1.0 / static_cast<double>(n.k);
      for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += g[i / n.k] * inv;
      break;
    }
    case Op::kL2Norm: {
      const double norm = yv[0];
      if (norm > 0.0) {
        for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += g[0] * xv[i] / norm;
      }
      break;
    }
    case Op::kGatherRows:
      for (std::size_t r = 0; r < n.index.size(); ++r)
        for (std::size_t c = 0; c < gx.cols(); ++c) gx(n.index[r], c) += g(r, c);
      break;
    case Op::kClamp:
      for (std::size_t i = 0; i < g.size(); ++i) {
        if (xv[i] >= n.a && xv[i] <= n.b) gx[i] += g[i];
      }
      break;
    default:
      throw ContractViolation(std::string("no backward rule for ") + op_name(n.op));
  }
}

Var affine(Var x, Var weight, Var bias) {
  Tape& t = tape_of(x, weight);
  if (bias.tape != &t) throw ContractViolation("operands recorded on different tapes");
  Tape::Node n;
  n.op = Op::kAffine;
  n.inputs = {x.id, weight.id, bias.id};
  n.value = kernels::affine(x.value(), weight.value(), bias.value());
  return t.push(std::move(n));
}

Var add(Var a, Var b) {
  return binary(Op::kAdd, a, b,
                broadcast_apply(a.value(), b.value(), [](double u, double v) { return u + v; }));
}

Var sub(Var a, Var b) {
  return binary(Op::kSub, a, b,
                broadcast_apply(a.value(), b.value(), [](double u, double v) { return u - v; }));
}

Var mul(Var a, Var b) {
  return binary(Op::kMul, a, b,
                broadcast_apply(a.value(), b.value(), [](double u, double v) { return u * v; }));
}

Var scale(Var a, double factor) {
  return unary(Op::kScale, a, map(a.value(), [factor](double v) { return factor * v; }), factor);
}

Var add_scalar(Var a, double offset) {
  return unary(Op::kAddScalar, a, map(a.value(), [offset](double v) { return v + offset; }));
}

Var tanh(Var a) {
  Matrix v = a.value();
  kernels::tanh_inplace(v);
  return unary(Op::kTanh, a, std::move(v));
}

Var relu(Var a) {
  Matrix v = a.value();
  kernels::relu_inplace(v);
  return unary(Op::kRelu, a, std::move(v));
}

Var sigmoid(Var a) {
  Matrix v = a.value();
  kernels::sigmoid_inplace(v);
  return unary(Op::kSigmoid, a, std::move(v));
}

Var log(Var a) { return unary(Op::kLog, a, map(a.value(), [](double v) { return std::log(v); })); }

Var exp(Var a) { return unary(Op::kExp, a, map(a.value(), [](double v) { return std::exp(v); })); }

Var square(Var a) { return unary(Op::kSquare, a, map(a.value(), [](double v) { return v * v; })); }

Var softplus(Var a) {
  return unary(Op::kSoftplus, a, map(a.value(), [](double v) { return softplus(v); }));
}

Var sum(Var a) {
  double acc = 0.0;
  for (double v : a.value().values()) acc += v;
  return unary(Op::kSum, a, Matrix::scalar(acc));
}

Var mean(Var a) {
  const Matrix& v = a.value();
  if (v.empty()) throw ContractViolation("mean of an empty matrix");
  double acc = 0.0;
  for (double x : v.values()) acc += x;
  return unary(Op::kMean, a, Matrix::scalar(acc / static_cast<double>(v.size())));
}

namespace {
Var row_reduce(Var a, double factor) {
  const Matrix& v = a.value();
  Matrix out(v.rows(), 1);
  for (std::size_t r = 0; r < v.rows(); ++r) {
    double acc = 0.0;
    for (double x : v.row(r)) acc += x;
    out[r] = acc * factor;
  }
  return unary(Op::kRowSum, a, std::move(out), factor);
}
}  // namespace

Var row_sum(Var a) { return row_reduce(a, 1.0); }

Var row_mean(Var a) {
  if (a.cols() == 0) throw ContractViolation("row_mean of a zero-width matrix");
  return row_reduce(a, 1.0 / static_cast<double>(a.cols()));
}

Var segment_mean(Var a, std::size_t segment) {
  const Matrix& v = a.value();
  if (segment == 0 || v.cols() != 1 || v.rows() % segment != 0) {
    throw ContractViolation("segment_mean needs a column whose length is a multiple of " +
                            std::to_string(segment) + ", got " + v.shape_string());
  }
  Matrix out(v.rows() / segment, 1);
  for (std::size_t i = 0; i < out.rows(); ++i) {
    double acc = 0.0;
    for (std::size_t j = 0; j < segment; ++j) acc += v[i * segment + j];
    out[i] = acc / static_cast<double>(segment);
  }
  Tape::Node n;
  n.op = Op::kSegmentMean;
  n.inputs = {a.id};
  n.value = std::move(out);
  n.k = segment;
  return tape_of(a).push(std::move(n));
}

Var l2_norm(Var a) {
  double acc = 0.0;
  for (double v : a.value().values()) acc += v * v;
  return unary(Op::kL2Norm, a, Matrix::scalar(std::sqrt(acc)));
}

Var concat_cols(std::span<const Var> parts) {
  if (parts.empty()) throw ContractViolation("concat_cols of nothing");
  Tape& t = tape_of(parts.front());
  const std::size_t rows = parts.front().rows();
  std::size_t cols = 0;
  for (const Var& p : parts) {
    if (p.tape != &t) throw ContractViolation("operands recorded on different tapes");
    if (p.rows() != rows) {
      throw ConfigurationError("concat_cols row mismatch: " + std::to_string(p.rows()) +
                               " vs " + std::to_string(rows));
    }
    cols += p.cols();
  }
  Matrix out(rows, cols);
  std::size_t offset = 0;
  for (const Var& p : parts) {
    const Matrix& v = p.value();
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t c = 0; c < v.cols(); ++c) out(r, offset + c) = v(r, c);
    offset += v.cols();
  }
  Tape::Node n;
  n.op = Op::kConcatCols;
  for (const Var& p : parts) n.inputs.push_back(p.id);
  n.value = std::move(out);
  return t.push(std::move(n));
}

Var gather_rows(Var table, std::span<const int> rows) {
  const Matrix& v = table.value();
  Matrix out(rows.size(), v.cols());
  Tape::Node n;
  n.index.reserve(rows.size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r] < 0 || static_cast<std::size_t>(rows[r]) >= v.rows()) {
      throw ContractViolation("gather_rows index " + std::to_string(rows[r]) +
                              " outside table of " + std::to_string(v.rows()) + " rows");
    }
    const auto src = static_cast<std::size_t>(rows[r]);
    n.index.push_back(src);
    for (std::size_t c = 0; c < v.cols(); ++c) out(r, c) = v(src, c);
  }
  n.op = Op::kGatherRows;
  n.inputs = {table.id};
  n.value = std::move(out);
  return tape_of(table).push(std::move(n));
}

Var minimum(Var a, Var b) {
  if (!a.value().same_shape(b.value())) {
    throw ConfigurationError("minimum shape mismatch " + a.value().shape_string() + " vs " +
                             b.value().shape_string());
  }
  Matrix out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::min(out[i], b.value()[i]);
  return binary(Op::kMinimum, a, b, std::move(out));
}

Var clamp(Var a, double lo, double hi) {
  if (!(lo <= hi)) throw ContractViolation("clamp with lo > hi");
  return unary(Op::kClamp, a, map(a.value(), [lo, hi](double v) { return std::clamp(v, lo, hi); }),
               lo, hi);
}

Var log_sigmoid(Var z) { return -softplus(-z); }

}  // namespace faillab::diff
