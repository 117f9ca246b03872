// Copyright 2026 The fail-lab Authors
// SPDX-License-Identifier: Apache-2.0

#include "faillab/fail_pg/fail_pg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace faillab::fail_pg {

void PgConfig::validate() const {
  if (group_size < 2) {
    throw ConfigurationError("group_size must be >= 2 (group advantage std needs G >= 2)");
  }
  if (!(clip_eps > 0.0 && clip_eps < 1.0)) throw ConfigurationError("clip_eps must lie in (0, 1)");
  if (inner_epochs < 1) throw ConfigurationError("inner_epochs must be >= 1");
  if (!(beta_kl >= 0.0)) throw ConfigurationError("beta_kl must be >= 0");
  if (!(adv_eps > 0.0)) throw ConfigurationError("adv_eps must be > 0");
  if (mc_pairs < 1) throw ConfigurationError("mc_pairs must be >= 1");
  if (!(delta_t > 0.0 && delta_t <= 1.0)) throw ConfigurationError("delta_t must lie in (0, 1]");
  if (warmup.warmup_steps < 0) throw ConfigurationError("warmup_steps must be >= 0");
  if (!(policy_clip > 0.0) || !(disc_clip > 0.0)) {
    throw ConfigurationError("clip norms must be > 0");
  }
}

std::vector<double> grpo_advantages(std::span<const double> rewards, double adv_eps) {
  if (rewards.size() < 2) throw ContractViolation("group advantages need at least 2 rewards");
  const double n = static_cast<double>(rewards.size());
  double mean = 0.0;
  for (double r : rewards) mean += r;
  mean /= n;
  double var = 0.0;
  for (double r : rewards) var += (r - mean) * (r - mean);
  const double std = std::sqrt(var / n);
  std::vector<double> out(rewards.size(), 0.0);
  if (!(std > adv_eps)) return out;
  for (std::size_t i = 0; i < rewards.size(); ++i) out[i] = (rewards[i] - mean) / std;
  return out;
}

CachedDraws CachedDraws::draw(std::size_t samples, std::size_t dim, std::size_t mc_pairs,
                              Rng& rng) {
  if (mc_pairs < 1) throw ContractViolation("mc_pairs must be >= 1");
  CachedDraws d;
  d.mc_pairs = mc_pairs;
  d.t = Matrix(samples * mc_pairs, 1);
  for (double& v : d.t.values()) v = rng.uniform();
  d.eps = rng.normal_matrix(samples * mc_pairs, dim);
  return d;
}

namespace {

flow::FlowSample expand(const Batch& samples, const CachedDraws& draws) {
  if (draws.t.rows() != samples.size() * draws.mc_pairs) {
    throw ContractViolation("cached draws do not match the sample count");
  }
  Matrix x0(draws.t.rows(), samples.x.cols());
  std::vector<int> cond(draws.t.rows());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    for (std::size_t k = 0; k < draws.mc_pairs; ++k) {
      const std::size_t r = i * draws.mc_pairs + k;
      for (std::size_t c = 0; c < x0.cols(); ++c) x0(r, c) = samples.x(i, c);
      cond[r] = samples.cond[i];
    }
  }
  return flow::FlowSample::make(std::move(x0), draws.eps, draws.t, std::move(cond));
}

}  // namespace

Var cfm_per_sample(const flow::VelocityField& field, Tape& tape, const Batch& samples,
                   const CachedDraws& draws) {
  const Var per_row = flow::cfm_loss_per_sample(field, tape, expand(samples, draws));
  return diff::segment_mean(per_row, draws.mc_pairs);
}

Matrix cfm_per_sample(const flow::VectorField& field, const Batch& samples,
                      const CachedDraws& draws) {
  Tape tape;
  return cfm_per_sample(flow::FrozenVectorField(field), tape, samples, draws).value();
}

Var fpo_ratio(Var loss_theta, const Matrix& loss_old, std::size_t* clamped) {
  Tape& tape = *loss_theta.tape;
  const Var log_ratio = tape.constant(loss_old) - loss_theta;
  if (clamped != nullptr) {
    for (double v : log_ratio.value().values()) *clamped += v > kMaxLogRatio ? 1 : 0;
  }
  return diff::exp(
      diff::clamp(log_ratio, -std::numeric_limits<double>::infinity(), kMaxLogRatio));
}

Var fpo_loss(Var ratio, const Matrix& advantages, double clip_eps) {
  Tape& tape = *ratio.tape;
  const Var a = tape.constant(advantages);
  return diff::minimum(ratio * a, diff::clamp(ratio, 1.0 - clip_eps, 1.0 + clip_eps) * a);
}

Var kl_estimate(Var loss_theta, const Matrix& loss_ref) {
  return diff::mean(loss_theta.tape->constant(loss_ref) - loss_theta);
}

Var pg_policy_loss(const flow::VelocityField& policy, Tape& tape, const Batch& members,
                   const CachedDraws& draws, const Matrix& loss_old, const Matrix& loss_ref,
                   const Matrix& advantages, const PgConfig& config, PgLossParts* parts) {
  const Var l_theta = cfm_per_sample(policy, tape, members, draws);
  std::size_t clamped = 0;
  const Var surrogate =
      diff::mean(fpo_loss(fpo_ratio(l_theta, loss_old, &clamped), advantages, config.clip_eps));
  const Var kl = kl_estimate(l_theta, loss_ref);
  if (parts != nullptr) {
    parts->surrogate = surrogate.value().item();
    parts->kl = kl.value().item();
    parts->clamped = clamped;
  }
  return diff::scale(kl, config.beta_kl) - surrogate;
}

Batch group_members(const Batch& rollouts, const Batch& expert, int group_size, bool hybrid) {
  const std::size_t g = static_cast<std::size_t>(group_size);
  if (rollouts.size() != expert.size() * g) {
    throw ContractViolation("rollouts must hold group_size samples per expert row");
  }
  const std::size_t width = g + (hybrid ? 1 : 0);
  Batch out{Matrix(expert.size() * width, expert.x.cols()), {}};
  out.cond.reserve(out.x.rows());
  for (std::size_t k = 0; k < expert.size(); ++k) {
    for (std::size_t j = 0; j < width; ++j) {
      const bool is_expert = j == g;
      const Matrix& src = is_expert ? expert.x : rollouts.x;
      const std::size_t row = is_expert ? k : k * g + j;
      for (std::size_t c = 0; c < out.x.cols(); ++c) out.x(k * width + j, c) = src(row, c);
      out.cond.push_back(expert.cond[k]);
    }
  }
  return out;
}

Matrix group_advantages(const Matrix& rewards, std::size_t group_width, double adv_eps) {
  if (rewards.cols() != 1 || rewards.rows() % group_width != 0) {
    throw ContractViolation("rewards must be a column of whole groups");
  }
  Matrix out(rewards.rows(), 1);
  for (std::size_t start = 0; start < rewards.rows(); start += group_width) {
    const auto adv = grpo_advantages(rewards.values().subspan(start, group_width), adv_eps);
    for (std::size_t j = 0; j < group_width; ++j) out[start + j] = adv[j];
  }
  return out;
}

namespace {

double mean_of_rollouts(const Matrix& member_rewards, std::size_t width, std::size_t g) {
  double s = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < member_rewards.rows(); ++i) {
    if (i % width < g) {
      s += member_rewards[i];
      ++n;
    }
  }
  return n == 0 ? 0.0 : s / static_cast<double>(n);
}

}  // namespace

PgStepMetrics policy_gradient_step(TrainState& state, const PgConfig& config, const Batch& expert,
                                   const RewardSources& sources) {
  if (expert.size() == 0) throw ContractViolation("expert batch is empty");
  if (!sources.discriminator && sources.static_reward == nullptr) {
    throw ConfigurationError("policy-gradient step needs at least one reward source");
  }
  PgStepMetrics metrics;
  const std::size_t g = static_cast<std::size_t>(config.group_size);
  Rng rollout_rng = state.stream("rollout");
  const auto rollout = adversary::sample_rollouts(
      state.policy, expert.repeated_cond(g), flow::steps_for_delta(config.delta_t), rollout_rng);

  if (sources.update_disc) {
    const auto d = adversary::discriminator_step(state.disc, state.disc_opt, expert, rollout.batch,
                                                 config.disc_clip, state.step);
    metrics.disc_loss = d.loss;
    metrics.disc_grad_norm = d.grad_norm;
    metrics.expert_prob = d.expert_prob;
    metrics.policy_prob = d.policy_prob;
  }

  const Batch members = group_members(rollout.batch, expert, config.group_size, config.hybrid);
  const std::size_t width = g + (config.hybrid ? 1 : 0);
  Matrix advantages(members.size(), 1);
  if (sources.discriminator) {
    const Matrix logits = state.disc.logit(members.x, members.cond);
    if (!sources.update_disc) {
      Matrix ze(expert.size(), 1);
      Matrix zp(rollout.batch.size(), 1);
      for (std::size_t i = 0, e = 0, p = 0; i < members.size(); ++i) {
        if (i % width < g) {
          zp[p++] = logits[i];
        } else {
          ze[e++] = logits[i];
        }
      }
      metrics.policy_prob = adversary::mean_probability(zp);
      if (config.hybrid) metrics.expert_prob = adversary::mean_probability(ze);
    }
    const Matrix rewards = adversary::pg_reward(logits);
    metrics.reward_mean = mean_of_rollouts(rewards, width, g);
    const Matrix adv = group_advantages(rewards, width, config.adv_eps);
    for (std::size_t i = 0; i < adv.size(); ++i) advantages[i] += adv[i];
  }
  if (sources.static_reward != nullptr) {
    const Matrix rewards = sources.static_reward->eval(members.x);
    metrics.static_reward_mean = mean_of_rollouts(rewards, width, g);
    const Matrix adv = group_advantages(rewards, width, config.adv_eps);
    for (std::size_t i = 0; i < adv.size(); ++i) advantages[i] += adv[i];
  }

  if (!config.warmup.policy_frozen(state.step)) {
    Rng draw_rng = state.stream("pg_draws");
    const auto draws = CachedDraws::draw(members.size(), members.x.cols(),
                                         static_cast<std::size_t>(config.mc_pairs), draw_rng);
    const Matrix loss_old = cfm_per_sample(state.policy, members, draws);
    const Matrix loss_ref = cfm_per_sample(state.reference, members, draws);
    for (int epoch = 0; epoch < config.inner_epochs; ++epoch) {
      Tape tape;
      const auto field = state.policy.bind(tape, true);
      PgLossParts parts;
      const Var loss = pg_policy_loss(field, tape, members, draws, loss_old, loss_ref, advantages,
                                      config, &parts);
      const auto update = adversary::apply_update(tape, loss, field.params(),
                                                  state.policy.tensors(), state.policy_opt,
                                                  config.policy_clip, state.step);
      metrics.surrogate = parts.surrogate;
      metrics.kl = parts.kl;
      metrics.ratio_clamped += parts.clamped;
      metrics.policy_grad_norm = update.grad_norm;
    }
    metrics.policy_updated = true;
  }
  ++state.step;
  return metrics;
}

}  // namespace faillab::fail_pg
