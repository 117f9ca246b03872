// Copyright 2026 The fail-lab Authors
// SPDX-License-Identifier: Apache-2.0

#include "faillab/flow/vector_field.hpp"

#include <cmath>
#include <numbers>

namespace faillab::flow {

Matrix time_features(const Matrix& t) {
  if (t.cols() != 1) throw ConfigurationError("time column must be B x 1, got " + t.shape_string());
  Matrix f(t.rows(), kTimeFeatures);
  for (std::size_t r = 0; r < t.rows(); ++r) {
    double omega = std::numbers::pi;
    for (std::size_t j = 0; j < kTimeFrequencies; ++j, omega *= 2.0) {
      f(r, 2 * j) = std::sin(omega * t[r]);
      f(r, 2 * j + 1) = std::cos(omega * t[r]);
    }
  }
  return f;
}

VectorField VectorField::create(std::size_t dim, std::size_t classes,
                                std::span<const std::size_t> hidden, diff::Activation activation,
                                Rng& rng) {
  if (dim == 0 || classes == 0) throw ConfigurationError("vector field needs dim and classes > 0");
  VectorField vf;
  vf.dim = dim;
  vf.classes = classes;
  vf.cond_embedding = Matrix(classes, kCondDim);
  for (double& v : vf.cond_embedding.values()) v = rng.uniform(-1.0, 1.0);
  std::vector<std::size_t> widths{vf.input_width()};
  widths.insert(widths.end(), hidden.begin(), hidden.end());
  widths.push_back(dim);
  vf.net = diff::MlpParams::uniform_init(widths, activation, rng);
  return vf;
}

void VectorField::zero_output() {
  auto& last = net.layers.back();
  last.weight = Matrix(last.weight.rows(), last.weight.cols());
  last.bias = Matrix(last.bias.rows(), last.bias.cols());
}

void VectorField::validate() const {
  net.validate();
  if (net.in_dim() != input_width()) {
    throw ConfigurationError("vector field input width " + std::to_string(net.in_dim()) +
                             " != " + std::to_string(input_width()));
  }
  if (net.out_dim() != dim) throw ConfigurationError("vector field output width must equal dim");
  if (cond_embedding.rows() != classes || cond_embedding.cols() != kCondDim) {
    throw ConfigurationError("class embedding must be classes x " + std::to_string(kCondDim));
  }
}

std::vector<Matrix*> VectorField::tensors() {
  std::vector<Matrix*> out{&cond_embedding};
  for (Matrix* m : net.tensors()) out.push_back(m);
  return out;
}

std::vector<const Matrix*> VectorField::tensors() const {
  std::vector<const Matrix*> out{&cond_embedding};
  for (const Matrix* m : net.tensors()) out.push_back(m);
  return out;
}

Var VectorField::network_input(Tape& tape, Var embedding, Var x, const Matrix& t,
                               std::span<const int> cond) const {
  if (x.cols() != dim) {
    throw ConfigurationError("state width " + std::to_string(x.cols()) + " != field dim " +
                             std::to_string(dim));
  }
  if (t.rows() != x.rows() || cond.size() != x.rows()) {
    throw ConfigurationError("time/conditioning rows do not match the state batch");
  }
  const Var parts[] = {x, tape.constant(time_features(t)), diff::gather_rows(embedding, cond)};
  return diff::concat_cols(parts);
}

Var VectorField::velocity(Tape& tape, std::span<const Var> bound, Var x, const Matrix& t,
                          std::span<const int> cond, std::vector<Var>* hidden) const {
  if (bound.size() != 1 + net.tensor_count()) {
    throw ConfigurationError("vector field expects " + std::to_string(1 + net.tensor_count()) +
                             " bound tensors");
  }
  const Var input = network_input(tape, bound[0], x, t, cond);
  return diff::mlp_apply(net, bound.subspan(1), input, hidden);
}

Matrix VectorField::velocity(const Matrix& x, const Matrix& t, std::span<const int> cond) const {
  // Same concatenation and kernels as the taped path, so values agree bitwise.
  Tape scratch;
  const Var embedding = scratch.constant(cond_embedding);
  const Var input = network_input(scratch, embedding, scratch.constant(x), t, cond);
  return diff::mlp_forward(net, input.value());
}

BoundVectorField VectorField::bind(Tape& tape, bool trainable) const {
  return BoundVectorField(*this, diff::bind(tape, tensors(), trainable));
}

Var FrozenVectorField::on_tape(Tape& tape, Var x, const Matrix& t,
                               std::span<const int> cond) const {
  return vf_->bind(tape, false).on_tape(tape, x, t, cond);
}

Matrix FrozenVectorField::eval(const Matrix& x, const Matrix& t, std::span<const int> cond) const {
  return vf_->velocity(x, t, cond);
}

Var BoundVectorField::on_tape(Tape& tape, Var x, const Matrix& t,
                              std::span<const int> cond) const {
  return vf_->velocity(tape, bound_, x, t, cond);
}

Matrix BoundVectorField::eval(const Matrix& x, const Matrix& t, std::span<const int> cond) const {
  return vf_->velocity(x, t, cond);
}

}  // namespace faillab::flow
