// Copyright 2026 The fail-lab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <span>

#include "faillab/adversary/discriminator.hpp"

namespace faillab::adversary {

/// −[mean log σ(z_E) + mean log(1 − σ(z_P))] over logit columns.
Var disc_loss(Var expert_logits, Var policy_logits);
Var disc_loss(const BoundDiscriminator& d, Tape& tape, Var expert_x,
              std::span<const int> expert_cond, Var policy_x, std::span<const int> policy_cond);

/// Non-saturating generator loss: mean −log σ(z).
Var generator_pd_loss(Var logits);
/// `d` should be bound as constants so that only the policy receives gradient.
Var generator_pd_loss(const BoundDiscriminator& d, Tape& tape, Var x0_prime,
                      std::span<const int> cond);

/// r = −log(1 − σ(z)) = softplus(z), elementwise; no tape involved.
Matrix pg_reward(const Matrix& logits);
Matrix pg_reward(const Discriminator& d, const Matrix& x, std::span<const int> cond);

/// Fraction of correctly classified points; σ(z) = 0.5 counts as expert.
double probe_accuracy(const Matrix& expert_logits, const Matrix& policy_logits);

struct WarmupSchedule {
  int warmup_steps = 25;
  bool policy_frozen(long step) const { return step < warmup_steps; }
};

}  // namespace faillab::adversary
