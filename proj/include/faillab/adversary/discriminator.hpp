// Copyright 2026 The fail-lab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <span>
#include <string_view>
#include <vector>

#include "faillab/diffcore/mlp.hpp"
#include "faillab/flow/vector_field.hpp"

namespace faillab::adversary {

using diff::Tape;
using diff::Var;

/// scratch: head over x ⊕ class embedding.
/// flow_feature: head over the last hidden layer of a trainable copy of the
///   policy network, probed at a fixed time with the state scaled to that
///   noise level.
/// frozen_feature: head over a fixed random tanh feature map ⊕ class
///   embedding; stands in for pretrained representations.
enum class DiscVariant { kScratch, kFlowFeature, kFrozenFeature };

std::string_view variant_name(DiscVariant v);
DiscVariant parse_variant(std::string_view name);

struct DiscriminatorSpec {
  DiscVariant variant = DiscVariant::kScratch;
  std::vector<std::size_t> hidden{64, 64};
  diff::Activation activation = diff::Activation::kTanh;
  bool spectral_norm = false;
  int spectral_iters = 5;
  double probe_t = 0.5;
  std::size_t feature_width = 64;

  friend bool operator==(const DiscriminatorSpec&, const DiscriminatorSpec&) = default;
};

class BoundDiscriminator;

/// The critic D(x, c), producing one logit per row.
struct Discriminator {
  DiscVariant variant = DiscVariant::kScratch;
  std::size_t dim = 0;
  std::size_t classes = 1;
  Matrix cond_embedding;        // scratch, frozen_feature
  flow::VectorField backbone;   // flow_feature
  Matrix feature_weight;        // frozen_feature, never trained
  Matrix feature_bias;          // frozen_feature, never trained
  diff::MlpParams head;
  bool spectral_norm = false;
  int spectral_iters = 5;
  std::vector<Matrix> spectral_vectors;  // one per head layer
  double probe_t = 0.5;

  /// `policy` seeds the flow_feature backbone and may be null otherwise.
  static Discriminator create(const DiscriminatorSpec& spec, std::size_t dim, std::size_t classes,
                              Rng& rng, const flow::VectorField* policy = nullptr);

  /// Trainable tensors in binding order.
  std::vector<Matrix*> tensors();
  std::vector<const Matrix*> tensors() const;

  Var logit(Tape& tape, std::span<const Var> bound, Var x, std::span<const int> cond) const;
  /// Tape-free logits, B x 1.
  Matrix logit(const Matrix& x, std::span<const int> cond) const;

  BoundDiscriminator bind(Tape& tape, bool trainable) const;

  /// Rescales every head layer to unit spectral norm when spectral
  /// normalization is enabled; called after each optimizer update.
  void project_spectral();

  friend bool operator==(const Discriminator&, const Discriminator&) = default;
};

/// A Discriminator with its tensors recorded on a tape, either as parameters
/// (discriminator update) or as constants (policy update).
class BoundDiscriminator {
 public:
  BoundDiscriminator(const Discriminator& d, std::vector<Var> bound)
      : d_(&d), bound_(std::move(bound)) {}
  Var logit(Tape& tape, Var x, std::span<const int> cond) const {
    return d_->logit(tape, bound_, x, cond);
  }
  std::span<const Var> params() const { return bound_; }

 private:
  const Discriminator* d_;
  std::vector<Var> bound_;
};

}  // namespace faillab::adversary
