// Copyright 2026 The fail-lab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <vector>

#include "faillab/adversary/train_state.hpp"

namespace faillab::testing {

inline adversary::TrainState small_state(std::size_t dim, std::size_t classes, std::uint64_t seed,
                                         adversary::DiscVariant variant =
                                             adversary::DiscVariant::kScratch) {
  Rng rng(seed);
  const std::size_t hidden[] = {8, 8};
  auto policy = flow::VectorField::create(dim, classes, hidden, diff::Activation::kTanh, rng);
  adversary::DiscriminatorSpec spec;
  spec.variant = variant;
  spec.hidden = {8, 8};
  spec.feature_width = 8;
  auto disc = adversary::Discriminator::create(spec, dim, classes, rng, &policy);
  return adversary::TrainState::create(std::move(policy), std::move(disc), {.lr = 1e-2},
                                       {.lr = 1e-2}, seed);
}

inline adversary::Batch gaussian_batch(std::size_t n, std::size_t dim, double mean, Rng& rng,
                                       std::size_t classes = 1) {
  adversary::Batch b{rng.normal_matrix(n, dim), std::vector<int>(n, 0)};
  for (double& v : b.x.values()) v += mean;
  for (std::size_t i = 0; i < n; ++i) b.cond[i] = static_cast<int>(i % classes);
  return b;
}

/// r(x) = −mean_j (x_j − p)² per row.
class QuadraticReward final : public adversary::Reward {
 public:
  explicit QuadraticReward(double p) : p_(p) {}
  diff::Var on_tape(diff::Tape&, diff::Var x) const override {
    return -diff::row_mean(diff::square(diff::add_scalar(x, -p_)));
  }
  Matrix eval(const Matrix& x) const override {
    Matrix r(x.rows(), 1);
    for (std::size_t i = 0; i < x.rows(); ++i) {
      for (std::size_t j = 0; j < x.cols(); ++j) r[i] -= (x(i, j) - p_) * (x(i, j) - p_);
      r[i] /= static_cast<double>(x.cols());
    }
    return r;
  }

 private:
  double p_;
};

inline bool tensors_equal(std::span<const Matrix* const> a, std::span<const Matrix* const> b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!(*a[i] == *b[i])) return false;
  }
  return true;
}

}  // namespace faillab::testing
