// Copyright 2026 The fail-lab Authors
// SPDX-License-Identifier: Apache-2.0

#include "faillab/adversary/discriminator.hpp"

#include <cmath>

#include "faillab/adversary/spectral_norm.hpp"

namespace faillab::adversary {

std::string_view variant_name(DiscVariant v) {
  switch (v) {
    case DiscVariant::kScratch: return "scratch";
    case DiscVariant::kFlowFeature: return "flow_feature";
    case DiscVariant::kFrozenFeature: return "frozen_feature";
  }
  return "scratch";
}

DiscVariant parse_variant(std::string_view name) {
  if (name == "scratch") return DiscVariant::kScratch;
  if (name == "flow_feature") return DiscVariant::kFlowFeature;
  if (name == "frozen_feature") return DiscVariant::kFrozenFeature;
  throw ConfigurationError("unknown discriminator variant '" + std::string(name) + "'");
}

Discriminator Discriminator::create(const DiscriminatorSpec& spec, std::size_t dim,
                                    std::size_t classes, Rng& rng,
                                    const flow::VectorField* policy) {
  if (dim == 0 || classes == 0) throw ConfigurationError("discriminator needs dim and classes > 0");
  if (!(spec.probe_t >= 0.0 && spec.probe_t < 1.0)) {
    throw ConfigurationError("discriminator probe_t must lie in [0, 1)");
  }
  Discriminator d;
  d.variant = spec.variant;
  d.dim = dim;
  d.classes = classes;
  d.spectral_norm = spec.spectral_norm;
  d.spectral_iters = spec.spectral_iters;
  d.probe_t = spec.probe_t;

  std::size_t head_in = 0;
  switch (spec.variant) {
    case DiscVariant::kScratch:
      head_in = dim + flow::kCondDim;
      break;
    case DiscVariant::kFlowFeature:
      if (policy == nullptr) throw ConfigurationError("flow_feature discriminator needs a policy");
      if (policy->net.layers.size() < 2) {
        throw ConfigurationError("flow_feature discriminator needs a policy with a hidden layer");
      }
      d.backbone = *policy;
      head_in = policy->net.layers[policy->net.layers.size() - 2].weight.rows();
      break;
    case DiscVariant::kFrozenFeature: {
      d.feature_weight = rng.normal_matrix(spec.feature_width, dim);
      d.feature_bias = Matrix(1, spec.feature_width);
      for (double& v : d.feature_bias.values()) v = rng.uniform(-1.0, 1.0);
      head_in = spec.feature_width + flow::kCondDim;
      break;
    }
  }
  if (spec.variant != DiscVariant::kFlowFeature) {
    d.cond_embedding = Matrix(classes, flow::kCondDim);
    for (double& v : d.cond_embedding.values()) v = rng.uniform(-1.0, 1.0);
  }
  std::vector<std::size_t> widths{head_in};
  widths.insert(widths.end(), spec.hidden.begin(), spec.hidden.end());
  widths.push_back(1);
  d.head = diff::MlpParams::uniform_init(widths, spec.activation, rng);
  d.spectral_vectors.resize(d.head.layers.size());
  if (d.spectral_norm) {
    // Warm the power-iteration vectors before the first projection.
    for (std::size_t k = 0; k < d.head.layers.size(); ++k) {
      leading_singular_value(d.head.layers[k].weight, d.spectral_vectors[k], 30);
    }
    d.project_spectral();
  }
  return d;
}

std::vector<Matrix*> Discriminator::tensors() {
  std::vector<Matrix*> out;
  if (variant == DiscVariant::kFlowFeature) {
    out = backbone.tensors();
  } else {
    out.push_back(&cond_embedding);
  }
  for (Matrix* m : head.tensors()) out.push_back(m);
  return out;
}

std::vector<const Matrix*> Discriminator::tensors() const {
  std::vector<const Matrix*> out;
  if (variant == DiscVariant::kFlowFeature) {
    out = backbone.tensors();
  } else {
    out.push_back(&cond_embedding);
  }
  for (const Matrix* m : head.tensors()) out.push_back(m);
  return out;
}

Var Discriminator::logit(Tape& tape, std::span<const Var> bound, Var x,
                         std::span<const int> cond) const {
  if (x.cols() != dim) {
    throw ConfigurationError("discriminator input width " + std::to_string(x.cols()) +
                             " != " + std::to_string(dim));
  }
  if (cond.size() != x.rows()) throw ConfigurationError("one class label per row required");
  const std::size_t head_count = head.tensor_count();
  if (bound.size() < head_count) throw ConfigurationError("too few bound discriminator tensors");
  const auto head_bound = bound.subspan(bound.size() - head_count);

  Var features;
  switch (variant) {
    case DiscVariant::kScratch: {
      const Var parts[] = {x, diff::gather_rows(bound[0], cond)};
      features = diff::concat_cols(parts);
      break;
    }
    case DiscVariant::kFrozenFeature: {
      const Var mapped = diff::tanh(
          diff::affine(x, tape.constant(feature_weight), tape.constant(feature_bias)));
      const Var parts[] = {mapped, diff::gather_rows(bound[0], cond)};
      features = diff::concat_cols(parts);
      break;
    }
    case DiscVariant::kFlowFeature: {
      // Noise-free point of the interpolation path at the probe time.
      const Var probe = diff::scale(x, 1.0 - probe_t);
      std::vector<Var> hidden;
      backbone.velocity(tape, bound.first(bound.size() - head_count), probe,
                        Matrix(x.rows(), 1, probe_t), cond, &hidden);
      features = hidden.back();
      break;
    }
  }
  return diff::mlp_apply(head, head_bound, features);
}

Matrix Discriminator::logit(const Matrix& x, std::span<const int> cond) const {
  Tape tape;
  const auto bound = diff::bind(tape, tensors(), false);
  return logit(tape, bound, tape.constant(x), cond).value();
}

BoundDiscriminator Discriminator::bind(Tape& tape, bool trainable) const {
  return BoundDiscriminator(*this, diff::bind(tape, tensors(), trainable));
}

void Discriminator::project_spectral() {
  if (!spectral_norm) return;
  spectral_vectors.resize(head.layers.size());
  for (std::size_t k = 0; k < head.layers.size(); ++k) {
    auto& w = head.layers[k].weight;
    Matrix& u = spectral_vectors[k];
    double sigma = leading_singular_value(w, u, spectral_iters);
    // Power iteration underestimates; refine until the estimate settles.
    for (int it = 0; it < 500 && sigma > 0.0; ++it) {
      const double next = leading_singular_value(w, u, 1);
      const bool settled = std::abs(next - sigma) <= 1e-9 * next;
      sigma = next;
      if (settled) break;
    }
    if (sigma > 0.0) {
      for (double& v : w.values()) v /= sigma;
    }
  }
}

}  // namespace faillab::adversary
