// Copyright 2026 The fail-lab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "faillab/diffcore/matrix.hpp"

namespace faillab::diff {

struct AdamHyper {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;

  friend bool operator==(const AdamHyper&, const AdamHyper&) = default;
};

struct AdamState {
  std::vector<Matrix> m;
  std::vector<Matrix> v;
  std::int64_t step = 0;
  AdamHyper hyper;

  /// Zero moments shaped like `params`.
  static AdamState zeros_like(std::span<const Matrix* const> params, AdamHyper hyper);

  friend bool operator==(const AdamState&, const AdamState&) = default;
};

/// Decoupled-weight-decay Adam with bias correction. Updates `params` in place
/// and increments `state.step` by one. A non-finite gradient rejects the whole
/// step (nothing is modified) and throws NumericalError naming the tensor.
void adamw_step(std::span<Matrix* const> params, std::span<const Matrix> grads, AdamState& state);

struct ClipResult {
  double pre_clip_norm = 0.0;
  bool clipped = false;
};

/// Scales all gradients by max_norm / norm when their global L2 norm strictly
/// exceeds max_norm.
ClipResult clip_global_norm(std::span<Matrix> grads, double max_norm);

}  // namespace faillab::diff
