// Copyright 2026 The fail-lab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "faillab/diffcore/matrix.hpp"
#include "faillab/diffcore/rng.hpp"
#include "faillab/diffcore/tape.hpp"

namespace faillab::diff {

enum class Activation { kIdentity, kTanh, kRelu, kSigmoid };

std::string_view activation_name(Activation a);
Activation parse_activation(std::string_view name);

struct DenseLayer {
  Matrix weight;  // out x in
  Matrix bias;    // 1 x out
  Activation activation = Activation::kIdentity;

  friend bool operator==(const DenseLayer&, const DenseLayer&) = default;
};

/// Feed-forward network. Hidden layers share one activation; the output layer
/// is affine.
struct MlpParams {
  std::vector<DenseLayer> layers;

  /// Uniform init in [-1/sqrt(fan_in), 1/sqrt(fan_in)] for weights and biases.
  static MlpParams uniform_init(std::span<const std::size_t> widths, Activation hidden, Rng& rng);

  std::size_t in_dim() const;
  std::size_t out_dim() const;
  /// Throws ConfigurationError when layer shapes do not chain or entries are non-finite.
  void validate() const;

  /// Tensors in binding order: W0, b0, W1, b1, ...
  std::vector<Matrix*> tensors();
  std::vector<const Matrix*> tensors() const;
  std::size_t tensor_count() const { return 2 * layers.size(); }

  friend bool operator==(const MlpParams&, const MlpParams&) = default;
};

/// Records each tensor as a parameter (trainable) or a constant on the tape.
std::vector<Var> bind(Tape& tape, std::span<const Matrix* const> tensors, bool trainable);

/// Evaluates the network on the tape. `bound` holds the layer tensors in
/// binding order. When `hidden` is non-null, post-activation outputs of every
/// hidden layer are appended to it.
Var mlp_apply(const MlpParams& shape, std::span<const Var> bound, Var input,
              std::vector<Var>* hidden = nullptr);

/// Convenience form binding the parameters on the given tape.
Var mlp_apply(const MlpParams& params, Var input, Tape& tape, bool trainable = true);

/// Tape-free evaluation using the same kernels as mlp_apply.
Matrix mlp_forward(const MlpParams& params, const Matrix& input);

}  // namespace faillab::diff
