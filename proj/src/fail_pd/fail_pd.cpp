// Copyright 2026 The fail-lab Authors
// SPDX-License-Identifier: Apache-2.0

#include "faillab/fail_pd/fail_pd.hpp"

namespace faillab::fail_pd {

void PdConfig::validate() const {
  if (group_size < 1) throw ConfigurationError("group_size must be >= 1");
  if (!(delta_t > 0.0 && delta_t < 1.0 - flow::kDenoiseMargin)) {
    throw ConfigurationError("delta_t must lie in (0, 1 - 1e-3)");
  }
  if (!(hybrid_bc_weight >= 0.0)) throw ConfigurationError("hybrid_bc_weight must be >= 0");
  if (warmup.warmup_steps < 0) throw ConfigurationError("warmup_steps must be >= 0");
  if (!(policy_clip > 0.0) || !(disc_clip > 0.0)) {
    throw ConfigurationError("clip norms must be > 0");
  }
}

Var pathwise_policy_loss(const flow::VelocityField& policy, Tape& tape,
                         const adversary::Discriminator& disc, const adversary::Rollout& rollout,
                         const Matrix& t, double delta_t, const PathwiseTerms& terms,
                         double bc_weight, const flow::FlowSample& bc_sample,
                         PdStepMetrics* metrics) {
  const auto& cond = rollout.batch.cond;
  const Var x0_prime =
      flow::single_step_denoise(policy, tape, rollout.batch.x, rollout.eps, t, delta_t, cond);
  Var loss = tape.constant(Matrix::scalar(0.0));
  if (terms.fail_weight != 0.0) {
    const Var gen = adversary::generator_pd_loss(disc.bind(tape, false), tape, x0_prime, cond);
    if (metrics != nullptr) metrics->gen_loss = gen.value().item();
    loss = loss + diff::scale(gen, terms.fail_weight);
  }
  if (terms.reward != nullptr && terms.reward_weight != 0.0) {
    const Var r = diff::mean(terms.reward->on_tape(tape, x0_prime));
    loss = loss - diff::scale(r, terms.reward_weight);
  }
  if (bc_weight != 0.0) {
    const Var bc = flow::cfm_loss(policy, tape, bc_sample);
    if (metrics != nullptr) metrics->bc_loss = bc.value().item();
    loss = loss + diff::scale(bc, bc_weight);
  }
  return loss;
}

PdStepMetrics pathwise_step(TrainState& state, const PdConfig& config, const Batch& expert,
                            const PathwiseTerms& terms) {
  if (expert.size() == 0) throw ContractViolation("expert batch is empty");
  PdStepMetrics metrics;
  Rng rollout_rng = state.stream("rollout");
  const auto rollout =
      adversary::sample_rollouts(state.policy, expert.repeated_cond(config.group_size),
                                 flow::steps_for_delta(config.delta_t), rollout_rng);
  if (terms.reward != nullptr) {
    const Matrix r = terms.reward->eval(rollout.batch.x);
    double s = 0.0;
    for (double v : r.values()) s += v;
    metrics.reward_mean = s / static_cast<double>(r.size());
  }

  if (terms.update_disc) {
    const auto d = adversary::discriminator_step(state.disc, state.disc_opt, expert, rollout.batch,
                                                 config.disc_clip, state.step);
    metrics.disc_loss = d.loss;
    metrics.disc_grad_norm = d.grad_norm;
    metrics.expert_prob = d.expert_prob;
    metrics.policy_prob = d.policy_prob;
  } else {
    metrics.expert_prob = adversary::mean_probability(state.disc.logit(expert.x, expert.cond));
    metrics.policy_prob =
        adversary::mean_probability(state.disc.logit(rollout.batch.x, rollout.batch.cond));
  }

  if (!config.warmup.policy_frozen(state.step)) {
    Rng t_rng = state.stream("denoise_t");
    Matrix t(rollout.batch.size(), 1);
    for (double& v : t.values()) v = t_rng.uniform(0.0, flow::max_denoise_time(config.delta_t));
    Rng bc_rng = state.stream("hybrid_bc");
    const auto bc_sample = flow::draw_sample(expert.x, expert.cond, bc_rng);

    Tape tape;
    const auto field = state.policy.bind(tape, true);
    const Var loss =
        pathwise_policy_loss(field, tape, state.disc, rollout, t, config.delta_t, terms,
                             config.hybrid_bc_weight, bc_sample, &metrics);
    const auto update = adversary::apply_update(tape, loss, field.params(), state.policy.tensors(),
                                                state.policy_opt, config.policy_clip, state.step);
    metrics.policy_grad_norm = update.grad_norm;
    metrics.policy_updated = true;
  }
  ++state.step;
  return metrics;
}

}  // namespace faillab::fail_pd
