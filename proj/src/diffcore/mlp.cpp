// Copyright 2026 The fail-lab Authors
// SPDX-License-Identifier: Apache-2.0

#include "faillab/diffcore/mlp.hpp"

#include <cmath>

#include "faillab/diffcore/kernels.hpp"

namespace faillab::diff {

std::string_view activation_name(Activation a) {
  switch (a) {
    case Activation::kIdentity: return "identity";
    case Activation::kTanh: return "tanh";
    case Activation::kRelu: return "relu";
    case Activation::kSigmoid: return "sigmoid";
  }
  return "identity";
}

Activation parse_activation(std::string_view name) {
  if (name == "identity") return Activation::kIdentity;
  if (name == "tanh") return Activation::kTanh;
  if (name == "relu") return Activation::kRelu;
  if (name == "sigmoid") return Activation::kSigmoid;
  throw ConfigurationError("unknown activation '" + std::string(name) + "'");
}

MlpParams MlpParams::uniform_init(std::span<const std::size_t> widths, Activation hidden,
                                  Rng& rng) {
  if (widths.size() < 2) throw ConfigurationError("an MLP needs at least input and output widths");
  MlpParams p;
  for (std::size_t k = 0; k + 1 < widths.size(); ++k) {
    const std::size_t in = widths[k];
    const std::size_t out = widths[k + 1];
    if (in == 0 || out == 0) throw ConfigurationError("MLP layer widths must be positive");
    const double bound = 1.0 / std::sqrt(static_cast<double>(in));
    DenseLayer layer{Matrix(out, in), Matrix(1, out),
                     k + 2 == widths.size() ? Activation::kIdentity : hidden};
    for (double& v : layer.weight.values()) v = rng.uniform(-bound, bound);
    for (double& v : layer.bias.values()) v = rng.uniform(-bound, bound);
    p.layers.push_back(std::move(layer));
  }
  return p;
}

std::size_t MlpParams::in_dim() const {
  if (layers.empty()) throw ConfigurationError("empty MLP");
  return layers.front().weight.cols();
}

std::size_t MlpParams::out_dim() const {
  if (layers.empty()) throw ConfigurationError("empty MLP");
  return layers.back().weight.rows();
}

void MlpParams::validate() const {
  if (layers.empty()) throw ConfigurationError("empty MLP");
  for (std::size_t k = 0; k < layers.size(); ++k) {
    const auto& l = layers[k];
    if (l.bias.rows() != 1 || l.bias.cols() != l.weight.rows()) {
      throw ConfigurationError("layer " + std::to_string(k) + " bias " + l.bias.shape_string() +
                               " does not match weight " + l.weight.shape_string());
    }
    if (k > 0 && l.weight.cols() != layers[k - 1].weight.rows()) {
      throw ConfigurationError("layer " + std::to_string(k) + " input width " +
                               std::to_string(l.weight.cols()) + " does not chain with " +
                               std::to_string(layers[k - 1].weight.rows()));
    }
    if (!l.weight.all_finite() || !l.bias.all_finite()) {
      throw ConfigurationError("layer " + std::to_string(k) + " has non-finite entries");
    }
  }
}

std::vector<Matrix*> MlpParams::tensors() {
  std::vector<Matrix*> out;
  for (auto& l : layers) {
    out.push_back(&l.weight);
    out.push_back(&l.bias);
  }
  return out;
}

std::vector<const Matrix*> MlpParams::tensors() const {
  std::vector<const Matrix*> out;
  for (const auto& l : layers) {
    out.push_back(&l.weight);
    out.push_back(&l.bias);
  }
  return out;
}

std::vector<Var> bind(Tape& tape, std::span<const Matrix* const> tensors, bool trainable) {
  std::vector<Var> out;
  out.reserve(tensors.size());
  for (const Matrix* m : tensors) out.push_back(trainable ? tape.param(*m) : tape.constant(*m));
  return out;
}

namespace {

Var activate(Var v, Activation a) {
  switch (a) {
    case Activation::kIdentity: return v;
    case Activation::kTanh: return tanh(v);
    case Activation::kRelu: return relu(v);
    case Activation::kSigmoid: return sigmoid(v);
  }
  return v;
}

void activate_inplace(Matrix& m, Activation a) {
  switch (a) {
    case Activation::kIdentity: return;
    case Activation::kTanh: kernels::tanh_inplace(m); return;
    case Activation::kRelu: kernels::relu_inplace(m); return;
    case Activation::kSigmoid: kernels::sigmoid_inplace(m); return;
  }
}

}  // namespace

Var mlp_apply(const MlpParams& shape, std::span<const Var> bound, Var input,
              std::vector<Var>* hidden) {
  if (bound.size() != shape.tensor_count()) {
    throw ConfigurationError("MLP expects " + std::to_string(shape.tensor_count()) +
                             " bound tensors, got " + std::to_string(bound.size()));
  }
  if (input.cols() != shape.in_dim()) {
    throw ConfigurationError("MLP input width " + std::to_string(input.cols()) +
                             " does not match first layer in-dimension " +
                             std::to_string(shape.in_dim()));
  }
  Var h = input;
  for (std::size_t k = 0; k < shape.layers.size(); ++k) {
    h = activate(affine(h, bound[2 * k], bound[2 * k + 1]), shape.layers[k].activation);
    if (hidden != nullptr && k + 1 < shape.layers.size()) hidden->push_back(h);
  }
  return h;
}

Var mlp_apply(const MlpParams& params, Var input, Tape& tape, bool trainable) {
  const auto tensors = params.tensors();
  const auto bound = bind(tape, tensors, trainable);
  return mlp_apply(params, bound, input);
}

Matrix mlp_forward(const MlpParams& params, const Matrix& input) {
  if (input.cols() != params.in_dim()) {
    throw ConfigurationError("MLP input width " + std::to_string(input.cols()) +
                             " does not match first layer in-dimension " +
                             std::to_string(params.in_dim()));
  }
  Matrix h = input;
  for (const auto& layer : params.layers) {
    h = kernels::affine(h, layer.weight, layer.bias);
    activate_inplace(h, layer.activation);
  }
  return h;
}

}  // namespace faillab::diff
