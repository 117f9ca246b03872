// Copyright 2026 The fail-lab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string_view>
#include <vector>

#include "faillab/fail_pd/fail_pd.hpp"
#include "faillab/fail_pg/fail_pg.hpp"

namespace faillab::baselines {

using adversary::Batch;
using adversary::TrainState;
using diff::Tape;
using diff::Var;

enum class RewardKind { kPointAttractor, kNormMax, kComponentMean };

std::string_view reward_kind_name(RewardKind k);
RewardKind parse_reward_kind(std::string_view name);

/// Hand-crafted differentiable rewards:
///   point_attractor  −scale · ‖x − target‖²
///   norm_max          scale · ‖x‖²
///   component_mean    scale · mean_j x_j
struct StaticReward final : adversary::Reward {
  RewardKind kind = RewardKind::kPointAttractor;
  std::vector<double> target;  // point_attractor only; empty means the origin
  double scale = 1.0;

  StaticReward() = default;
  StaticReward(RewardKind k, std::vector<double> p, double s)
      : kind(k), target(std::move(p)), scale(s) {}

  Var on_tape(Tape& tape, Var x) const override;
  Matrix eval(const Matrix& x) const override;
};

/// One AdamW step on the mean expert CFM loss with fresh (t, ε) from `rng`.
/// Returns the loss before the step.
double sft_update(flow::VectorField& policy, diff::AdamState& opt, const Batch& expert, Rng& rng,
                  double max_norm, long step);

/// sft_update on the state's policy with the step's "sft" stream; increments
/// state.step.
double sft_step(TrainState& state, const Batch& expert, double max_norm = 1.0);

/// Pathwise ascent on a static reward: fail_pd's plumbing without the
/// discriminator term.
fail_pd::PdStepMetrics reward_gradient_step(TrainState& state, const fail_pd::PdConfig& config,
                                            const Batch& expert, const StaticReward& reward,
                                            double reward_weight = 1.0);

/// fail_pg's loop with the static reward in place of the discriminator.
fail_pg::PgStepMetrics fpo_static_step(TrainState& state, const fail_pg::PgConfig& config,
                                       const Batch& expert, const StaticReward& reward);

/// generator_pd_loss · fail_weight − reward_weight · mean reward, with the
/// discriminator trained as in fail_pd.
fail_pd::PdStepMetrics combined_pd_step(TrainState& state, const fail_pd::PdConfig& config,
                                        const Batch& expert, const StaticReward& reward,
                                        double fail_weight, double reward_weight);

/// Discriminator and static advantages normalised separately, then summed.
fail_pg::PgStepMetrics combined_pg_step(TrainState& state, const fail_pg::PgConfig& config,
                                        const Batch& expert, const StaticReward& reward);

struct DpoConfig {
  double beta_dpo = 1.0;
  int mc_pairs = 4;
  double delta_t = flow::kDefaultDeltaT;
  double policy_clip = 1.0;

  void validate() const;
};

/// mean softplus(−β·[(L_ref(x_w) − L_θ(x_w)) − (L_ref(x_l) − L_θ(x_l))]).
Var dpo_loss(Var loss_winner, Var loss_loser, const Matrix& ref_winner, const Matrix& ref_loser,
             double beta);

struct DpoStepMetrics {
  double loss = 0.0;
  double margin = 0.0;  // mean bracket before scaling by β
  double policy_grad_norm = 0.0;
};

/// Pairs each expert point (winner) with one fresh rollout of the same class
/// (loser) and takes one AdamW step on dpo_loss against state.reference.
DpoStepMetrics online_dpo_step(TrainState& state, const DpoConfig& config, const Batch& expert);

}  // namespace faillab::baselines
