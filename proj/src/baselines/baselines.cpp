// Copyright 2026 The fail-lab Authors
// SPDX-License-Identifier: Apache-2.0

#include "faillab/baselines/baselines.hpp"

#include <string>

namespace faillab::baselines {

std::string_view reward_kind_name(RewardKind k) {
  switch (k) {
    case RewardKind::kPointAttractor: return "point_attractor";
    case RewardKind::kNormMax: return "norm_max";
    case RewardKind::kComponentMean: return "component_mean";
  }
  return "point_attractor";
}

RewardKind parse_reward_kind(std::string_view name) {
  if (name == "point_attractor") return RewardKind::kPointAttractor;
  if (name == "norm_max") return RewardKind::kNormMax;
  if (name == "component_mean") return RewardKind::kComponentMean;
  throw ConfigurationError("unknown reward kind '" + std::string(name) + "'");
}

namespace {

Matrix target_row(const std::vector<double>& target, std::size_t dim) {
  if (target.empty()) return Matrix(1, dim);
  if (target.size() != dim) {
    throw ConfigurationError("reward target has " + std::to_string(target.size()) +
                             " entries for dimension " + std::to_string(dim));
  }
  return Matrix(1, dim, target);
}

}  // namespace

Var StaticReward::on_tape(Tape& tape, Var x) const {
  switch (kind) {
    case RewardKind::kPointAttractor: {
      const Var diff = x - tape.constant(target_row(target, x.cols()));
      return diff::scale(diff::row_sum(diff::square(diff)), -scale);
    }
    case RewardKind::kNormMax:
      return diff::scale(diff::row_sum(diff::square(x)), scale);
    case RewardKind::kComponentMean:
      return diff::scale(diff::row_mean(x), scale);
  }
  throw ContractViolation("unhandled reward kind");
}

Matrix StaticReward::eval(const Matrix& x) const {
  Tape tape;
  return on_tape(tape, tape.constant(x)).value();
}

double sft_update(flow::VectorField& policy, diff::AdamState& opt, const Batch& expert, Rng& rng,
                  double max_norm, long step) {
  if (expert.size() == 0) throw ContractViolation("expert batch is empty");
  const auto sample = flow::draw_sample(expert.x, expert.cond, rng);
  Tape tape;
  const auto field = policy.bind(tape, true);
  const Var loss = flow::cfm_loss(field, tape, sample);
  return adversary::apply_update(tape, loss, field.params(), policy.tensors(), opt, max_norm, step)
      .loss;
}

double sft_step(TrainState& state, const Batch& expert, double max_norm) {
  Rng rng = state.stream("sft");
  const double loss = sft_update(state.policy, state.policy_opt, expert, rng, max_norm, state.step);
  ++state.step;
  return loss;
}

fail_pd::PdStepMetrics reward_gradient_step(TrainState& state, const fail_pd::PdConfig& config,
                                            const Batch& expert, const StaticReward& reward,
                                            double reward_weight) {
  fail_pd::PathwiseTerms terms;
  terms.fail_weight = 0.0;
  terms.reward = &reward;
  terms.reward_weight = reward_weight;
  terms.update_disc = false;
  return fail_pd::pathwise_step(state, config, expert, terms);
}

fail_pg::PgStepMetrics fpo_static_step(TrainState& state, const fail_pg::PgConfig& config,
                                       const Batch& expert, const StaticReward& reward) {
  fail_pg::RewardSources sources;
  sources.discriminator = false;
  sources.update_disc = false;
  sources.static_reward = &reward;
  return fail_pg::policy_gradient_step(state, config, expert, sources);
}

fail_pd::PdStepMetrics combined_pd_step(TrainState& state, const fail_pd::PdConfig& config,
                                        const Batch& expert, const StaticReward& reward,
                                        double fail_weight, double reward_weight) {
  fail_pd::PathwiseTerms terms;
  terms.fail_weight = fail_weight;
  terms.reward = &reward;
  terms.reward_weight = reward_weight;
  return fail_pd::pathwise_step(state, config, expert, terms);
}

fail_pg::PgStepMetrics combined_pg_step(TrainState& state, const fail_pg::PgConfig& config,
                                        const Batch& expert, const StaticReward& reward) {
  fail_pg::RewardSources sources;
  sources.static_reward = &reward;
  return fail_pg::policy_gradient_step(state, config, expert, sources);
}

void DpoConfig::validate() const {
  if (!(beta_dpo > 0.0)) throw ConfigurationError("beta_dpo must be > 0");
  if (mc_pairs < 1) throw ConfigurationError("mc_pairs must be >= 1");
  if (!(delta_t > 0.0 && delta_t <= 1.0)) throw ConfigurationError("delta_t must lie in (0, 1]");
  if (!(policy_clip > 0.0)) throw ConfigurationError("clip norms must be > 0");
}

Var dpo_loss(Var loss_winner, Var loss_loser, const Matrix& ref_winner, const Matrix& ref_loser,
             double beta) {
  Tape& tape = *loss_winner.tape;
  const Var margin = (tape.constant(ref_winner) - loss_winner) -
                     (tape.constant(ref_loser) - loss_loser);
  return diff::mean(diff::softplus(diff::scale(margin, -beta)));
}

DpoStepMetrics online_dpo_step(TrainState& state, const DpoConfig& config, const Batch& expert) {
  if (expert.size() == 0) throw ContractViolation("expert batch is empty");
  Rng rollout_rng = state.stream("rollout");
  const auto rollout = adversary::sample_rollouts(state.policy, expert.cond,
                                                  flow::steps_for_delta(config.delta_t),
                                                  rollout_rng);
  Rng draw_rng = state.stream("dpo_draws");
  const auto mc = static_cast<std::size_t>(config.mc_pairs);
  const auto draws_w = fail_pg::CachedDraws::draw(expert.size(), expert.x.cols(), mc, draw_rng);
  const auto draws_l = fail_pg::CachedDraws::draw(expert.size(), expert.x.cols(), mc, draw_rng);
  const Matrix ref_w = fail_pg::cfm_per_sample(state.reference, expert, draws_w);
  const Matrix ref_l = fail_pg::cfm_per_sample(state.reference, rollout.batch, draws_l);

  Tape tape;
  const auto field = state.policy.bind(tape, true);
  const Var lw = fail_pg::cfm_per_sample(field, tape, expert, draws_w);
  const Var ll = fail_pg::cfm_per_sample(field, tape, rollout.batch, draws_l);
  DpoStepMetrics metrics;
  double margin = 0.0;
  for (std::size_t i = 0; i < expert.size(); ++i) {
    margin += (ref_w[i] - lw.value()[i]) - (ref_l[i] - ll.value()[i]);
  }
  metrics.margin = margin / static_cast<double>(expert.size());
  const Var loss = dpo_loss(lw, ll, ref_w, ref_l, config.beta_dpo);
  const auto update = adversary::apply_update(tape, loss, field.params(), state.policy.tensors(),
                                              state.policy_opt, config.policy_clip, state.step);
  metrics.loss = update.loss;
  metrics.policy_grad_norm = update.grad_norm;
  ++state.step;
  return metrics;
}

}  // namespace faillab::baselines
