// Copyright 2026 The fail-lab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <limits>
#include <map>
#include <span>
#include <vector>

#include "faillab/diffcore/matrix.hpp"

namespace faillab::diff {

class Tape;

/// Handle to a node recorded on a Tape. Cheap to copy; valid while the tape lives.
struct Var {
  Tape* tape = nullptr;
  std::size_t id = 0;

  const Matrix& value() const;
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }
};

enum class Op {
  kConstant,
  kParam,
  kAffine,
  kAdd,
  kSub,
  kMul,
  kScale,
  kAddScalar,
  kTanh,
  kRelu,
  kSigmoid,
  kLog,
  kExp,
  kSquare,
  kSoftplus,
  kSum,
  kMean,
  kRowSum,
  kSegmentMean,
  kL2Norm,
  kConcatCols,
  kGatherRows,
  kMinimum,
  kClamp,
};

const char* op_name(Op op);

/// Parameter node id -> adjoint of the loss with respect to that leaf.
using GradientMap = std::map<std::size_t, Matrix>;

/// Reverse-mode recording of a computation over dense matrices.
///
/// Nodes are appended in evaluation order, so every node's inputs precede it.
/// A tape is built for a single loss evaluation and then discarded.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Matrix value);
  /// Leaf whose adjoint is reported by backward().
  Var param(Matrix value);

  const Matrix& value(Var v) const { return nodes_.at(v.id).value; }
  /// Adjoint from the last backward pass; zero-shaped for nodes that do not
  /// depend on any parameter.
  const Matrix& adjoint(Var v) const { return nodes_.at(v.id).adjoint; }
  Op op(Var v) const { return nodes_.at(v.id).op; }
  std::span<const std::size_t> inputs(Var v) const { return nodes_.at(v.id).inputs; }
  std::size_t size() const { return nodes_.size(); }

  /// Seeds the scalar loss with adjoint 1 and propagates to every parameter.
  /// Throws ContractViolation for non-scalar losses and NumericalError when an
  /// adjoint becomes non-finite.
  GradientMap backward(Var loss);

  /// Adjoints of the given vars after backward(), zero when unreachable.
  std::vector<Matrix> gradients(std::span<const Var> vars) const;

  struct Node {
    Op op = Op::kConstant;
    std::vector<std::size_t> inputs;
    Matrix value;
    Matrix adjoint;
    bool requires_grad = false;
    double a = 0.0;
    double b = 0.0;
    std::size_t k = 0;
    std::vector<std::size_t> index;
  };

  Var push(Node node);
  const Node& node(std::size_t id) const { return nodes_[id]; }

 private:
  void propagate(std::size_t id);

  std::vector<Node> nodes_;
};

// Primitive operations. Binary elementwise ops broadcast dimensions of size 1.

/// x (B x in) * W^T (in x out) + b (1 x out).
Var affine(Var x, Var weight, Var bias);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double factor);
Var add_scalar(Var a, double offset);
Var tanh(Var a);
Var relu(Var a);
Var sigmoid(Var a);
Var log(Var a);
Var exp(Var a);
Var square(Var a);
/// log(1 + e^x), overflow-free.
Var softplus(Var a);
Var sum(Var a);
Var mean(Var a);
/// B x C -> B x 1.
Var row_sum(Var a);
/// Mean over dimensions per row, B x C -> B x 1.
Var row_mean(Var a);
/// Averages consecutive blocks of `segment` rows of a column: (n*segment) x 1 -> n x 1.
Var segment_mean(Var a, std::size_t segment);
/// Frobenius norm of all entries.
Var l2_norm(Var a);
Var concat_cols(std::span<const Var> parts);
/// Row lookup into an embedding table.
Var gather_rows(Var table, std::span<const int> rows);
Var minimum(Var a, Var b);
Var clamp(Var a, double lo, double hi = std::numeric_limits<double>::infinity());

inline Var operator+(Var a, Var b) { return add(a, b); }
inline Var operator-(Var a, Var b) { return sub(a, b); }
inline Var operator*(Var a, Var b) { return mul(a, b); }
inline Var operator*(double s, Var a) { return scale(a, s); }
inline Var operator-(Var a) { return scale(a, -1.0); }

/// Numerically stable log(sigmoid(z)) = -softplus(-z).
Var log_sigmoid(Var z);

/// Scalar softplus for tape-free evaluation.
double softplus(double z);
double sigmoid(double z);

}  // namespace faillab::diff
