// Copyright 2026 The fail-lab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <span>
#include <vector>

#include "faillab/diffcore/mlp.hpp"
#include "faillab/diffcore/rng.hpp"
#include "faillab/diffcore/tape.hpp"

namespace faillab::flow {

using diff::Tape;
using diff::Var;

/// Number of sinusoid frequencies in the time embedding (sin and cos each).
inline constexpr std::size_t kTimeFrequencies = 4;
inline constexpr std::size_t kTimeFeatures = 2 * kTimeFrequencies;
/// Width of the learned per-class conditioning embedding.
inline constexpr std::size_t kCondDim = 4;

/// Sinusoidal features of a B x 1 column of times, B x kTimeFeatures.
Matrix time_features(const Matrix& t);

/// A velocity field v(x, t, c) that can be evaluated with or without a tape.
/// `t` is a B x 1 column; `cond` holds one class index per row.
class VelocityField {
 public:
  virtual ~VelocityField() = default;
  virtual Var on_tape(Tape& tape, Var x, const Matrix& t, std::span<const int> cond) const = 0;
  virtual Matrix eval(const Matrix& x, const Matrix& t, std::span<const int> cond) const = 0;
};

class BoundVectorField;

/// The policy network: an MLP over x ⊕ time features ⊕ class embedding whose
/// output has the data dimension.
struct VectorField {
  std::size_t dim = 0;
  std::size_t classes = 1;
  Matrix cond_embedding;  // classes x kCondDim
  diff::MlpParams net;

  static VectorField create(std::size_t dim, std::size_t classes,
                            std::span<const std::size_t> hidden, diff::Activation activation,
                            Rng& rng);

  std::size_t input_width() const { return dim + kTimeFeatures + kCondDim; }
  /// Sets the output layer to zero so that v ≡ 0.
  void zero_output();
  void validate() const;

  /// Tensors in binding order: class embedding, then the MLP's tensors.
  std::vector<Matrix*> tensors();
  std::vector<const Matrix*> tensors() const;

  /// Assembles the network input x ⊕ time features ⊕ class embedding.
  Var network_input(Tape& tape, Var embedding, Var x, const Matrix& t,
                    std::span<const int> cond) const;
  Var velocity(Tape& tape, std::span<const Var> bound, Var x, const Matrix& t,
               std::span<const int> cond, std::vector<Var>* hidden = nullptr) const;
  Matrix velocity(const Matrix& x, const Matrix& t, std::span<const int> cond) const;

  BoundVectorField bind(Tape& tape, bool trainable) const;

  friend bool operator==(const VectorField&, const VectorField&) = default;
};

/// Tape-free field backed by VectorField; on_tape binds weights as constants.
class FrozenVectorField final : public VelocityField {
 public:
  explicit FrozenVectorField(const VectorField& vf) : vf_(&vf) {}
  Var on_tape(Tape& tape, Var x, const Matrix& t, std::span<const int> cond) const override;
  Matrix eval(const Matrix& x, const Matrix& t, std::span<const int> cond) const override;

 private:
  const VectorField* vf_;
};

/// A VectorField whose tensors are recorded on a specific tape.
class BoundVectorField final : public VelocityField {
 public:
  BoundVectorField(const VectorField& vf, std::vector<Var> bound)
      : vf_(&vf), bound_(std::move(bound)) {}
  Var on_tape(Tape& tape, Var x, const Matrix& t, std::span<const int> cond) const override;
  Matrix eval(const Matrix& x, const Matrix& t, std::span<const int> cond) const override;
  std::span<const Var> params() const { return bound_; }

 private:
  const VectorField* vf_;
  std::vector<Var> bound_;
};

}  // namespace faillab::flow
