// Copyright 2026 The fail-lab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "faillab/adversary/losses.hpp"
#include "faillab/adversary/train_state.hpp"
#include "faillab/flow/flow.hpp"

namespace faillab::fail_pd {

using adversary::Batch;
using adversary::TrainState;
using diff::Tape;
using diff::Var;

struct PdConfig {
  int group_size = 3;
  double delta_t = flow::kDefaultDeltaT;
  /// λ on the auxiliary expert CFM loss.
  double hybrid_bc_weight = 0.1;
  adversary::WarmupSchedule warmup;
  double policy_clip = 1.0;
  double disc_clip = 1.0;

  void validate() const;
};

/// Which terms enter the pathwise policy loss
///   fail_weight · generator_pd_loss − reward_weight · mean reward + λ · expert CFM.
/// Plain FAIL-PD uses the defaults; the reward-gradient baseline and the
/// combined method reuse the step with other weights.
struct PathwiseTerms {
  double fail_weight = 1.0;
  const adversary::Reward* reward = nullptr;
  double reward_weight = 0.0;
  bool update_disc = true;
};

struct PdStepMetrics {
  double disc_loss = 0.0;
  double gen_loss = 0.0;
  double reward_mean = 0.0;  // static reward on the rollouts, 0 without one
  double bc_loss = 0.0;
  double expert_prob = 0.0;  // mean σ(D) on the expert batch
  double policy_prob = 0.0;  // mean σ(D) on the rollouts
  double disc_grad_norm = 0.0;
  double policy_grad_norm = 0.0;
  bool policy_updated = false;
};

/// One iteration: G rollouts per expert conditioning, one discriminator step
/// (when enabled), then, outside warmup, one policy step through the
/// single-step denoiser. Increments state.step.
PdStepMetrics pathwise_step(TrainState& state, const PdConfig& config, const Batch& expert,
                            const PathwiseTerms& terms);

inline PdStepMetrics pd_train_step(TrainState& state, const PdConfig& config,
                                   const Batch& expert) {
  return pathwise_step(state, config, expert, PathwiseTerms{});
}

/// The policy loss of pathwise_step on given rollouts, exposed for gradient
/// checks. `disc` is bound as constants.
Var pathwise_policy_loss(const flow::VelocityField& policy, Tape& tape,
                         const adversary::Discriminator& disc, const adversary::Rollout& rollout,
                         const Matrix& t, double delta_t, const PathwiseTerms& terms,
                         double bc_weight, const flow::FlowSample& bc_sample,
                         PdStepMetrics* metrics = nullptr);

}  // namespace faillab::fail_pd
