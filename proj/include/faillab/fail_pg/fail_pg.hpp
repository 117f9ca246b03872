// Copyright 2026 The fail-lab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <span>
#include <vector>

#include "faillab/adversary/losses.hpp"
#include "faillab/adversary/train_state.hpp"
#include "faillab/flow/flow.hpp"

namespace faillab::fail_pg {

using adversary::Batch;
using adversary::TrainState;
using diff::Tape;
using diff::Var;

/// Largest exponent accepted by fpo_ratio before clamping.
inline constexpr double kMaxLogRatio = 30.0;

struct PgConfig {
  int group_size = 3;
  double clip_eps = 0.2;
  int inner_epochs = 1;
  double beta_kl = 0.05;
  double adv_eps = 1e-8;
  int mc_pairs = 4;
  /// Expert samples join each group as extra members.
  bool hybrid = true;
  double delta_t = flow::kDefaultDeltaT;  // rollout sampler step
  adversary::WarmupSchedule warmup;
  double policy_clip = 1.0;
  double disc_clip = 1.0;

  void validate() const;
};

/// (r − mean) / max(population std, adv_eps); all zeros when the std does not
/// exceed adv_eps.
std::vector<double> grpo_advantages(std::span<const double> rewards, double adv_eps);

/// `mc_pairs` (t, ε) draws per sample, stored as consecutive rows so that
/// rows [i·mc, (i+1)·mc) belong to sample i.
struct CachedDraws {
  Matrix t;
  Matrix eps;
  std::size_t mc_pairs = 1;

  static CachedDraws draw(std::size_t samples, std::size_t dim, std::size_t mc_pairs, Rng& rng);
  std::size_t samples() const { return t.rows() / mc_pairs; }
};

/// Monte Carlo CFM loss per sample on the cached draws, n x 1.
Var cfm_per_sample(const flow::VelocityField& field, Tape& tape, const Batch& samples,
                   const CachedDraws& draws);
Matrix cfm_per_sample(const flow::VectorField& field, const Batch& samples,
                      const CachedDraws& draws);

/// exp(L_old − L_θ) elementwise. Exponents above kMaxLogRatio are clamped
/// (zero gradient there) and counted in `clamped`.
Var fpo_ratio(Var loss_theta, const Matrix& loss_old, std::size_t* clamped = nullptr);

/// min(r·A, clip(r, 1 − ε, 1 + ε)·A) elementwise.
Var fpo_loss(Var ratio, const Matrix& advantages, double clip_eps);

/// mean(L_ref − L_θ).
Var kl_estimate(Var loss_theta, const Matrix& loss_ref);

struct PgLossParts {
  double surrogate = 0.0;
  double kl = 0.0;
  std::size_t clamped = 0;
};

/// −mean fpo_loss + β·kl_estimate over `members`.
Var pg_policy_loss(const flow::VelocityField& policy, Tape& tape, const Batch& members,
                   const CachedDraws& draws, const Matrix& loss_old, const Matrix& loss_ref,
                   const Matrix& advantages, const PgConfig& config, PgLossParts* parts = nullptr);

/// Where rewards come from. With both sources, advantages are normalised
/// per source and summed.
struct RewardSources {
  bool discriminator = true;
  bool update_disc = true;
  const adversary::Reward* static_reward = nullptr;
};

struct PgStepMetrics {
  double disc_loss = 0.0;
  double disc_grad_norm = 0.0;
  double expert_prob = 0.0;
  double policy_prob = 0.0;
  double reward_mean = 0.0;         // discriminator reward on the rollouts
  double static_reward_mean = 0.0;  // static reward on the rollouts
  double surrogate = 0.0;
  double kl = 0.0;
  double policy_grad_norm = 0.0;
  std::size_t ratio_clamped = 0;
  bool policy_updated = false;
};

/// Group members: for every expert row, its G rollouts followed (when hybrid)
/// by the expert point itself.
Batch group_members(const Batch& rollouts, const Batch& expert, int group_size, bool hybrid);

/// Per-group advantages of a reward column laid out as by group_members.
Matrix group_advantages(const Matrix& rewards, std::size_t group_width, double adv_eps);

/// One iteration of the policy-gradient loop. Increments state.step.
PgStepMetrics policy_gradient_step(TrainState& state, const PgConfig& config, const Batch& expert,
                                   const RewardSources& sources);

inline PgStepMetrics pg_train_step(TrainState& state, const PgConfig& config,
                                   const Batch& expert) {
  return policy_gradient_step(state, config, expert, RewardSources{});
}

}  // namespace faillab::fail_pg
