// Copyright 2026 The fail-lab Authors
// SPDX-License-Identifier: Apache-2.0

#include "faillab/adversary/train_state.hpp"

#include <cmath>

#include "faillab/adversary/losses.hpp"
#include "faillab/flow/flow.hpp"

namespace faillab::adversary {

std::vector<int> Batch::repeated_cond(std::size_t times) const {
  std::vector<int> out;
  out.reserve(cond.size() * times);
  for (int c : cond) out.insert(out.end(), times, c);
  return out;
}

TrainState TrainState::create(flow::VectorField policy, Discriminator disc,
                              diff::AdamHyper policy_hyper, diff::AdamHyper disc_hyper,
                              std::uint64_t seed) {
  TrainState s;
  s.policy = std::move(policy);
  s.reference = s.policy;
  s.disc = std::move(disc);
  s.policy_opt = diff::AdamState::zeros_like(s.policy.tensors(), policy_hyper);
  s.disc_opt = diff::AdamState::zeros_like(s.disc.tensors(), disc_hyper);
  s.seed = seed;
  return s;
}

Rng TrainState::stream(std::string_view name) const {
  return Rng(seed, name, static_cast<std::uint64_t>(step));
}

UpdateResult apply_update(Tape& tape, Var loss, std::span<const Var> bound,
                          std::span<Matrix* const> params, diff::AdamState& opt, double max_norm,
                          long step) {
  const double value = loss.value().item();
  if (!std::isfinite(value)) {
    throw DivergenceError("non-finite loss at step " + std::to_string(step), step);
  }
  try {
    tape.backward(loss);
  } catch (const NumericalError& e) {
    throw DivergenceError(std::string(e.what()) + " at step " + std::to_string(step), step);
  }
  std::vector<Matrix> grads = tape.gradients(bound);
  for (const Matrix& g : grads) {
    if (!g.all_finite()) {
      throw DivergenceError("non-finite gradient at step " + std::to_string(step), step);
    }
  }
  const auto clip = diff::clip_global_norm(grads, max_norm);
  diff::adamw_step(params, grads, opt);
  return {value, clip.pre_clip_norm};
}

Rollout sample_rollouts(const flow::VectorField& policy, std::vector<int> cond, std::size_t n_steps,
                        Rng& rng) {
  Rollout out;
  out.eps = rng.normal_matrix(cond.size(), policy.dim);
  out.batch.x = flow::euler_sample(flow::FrozenVectorField(policy), out.eps, cond, n_steps);
  out.batch.cond = std::move(cond);
  return out;
}

double mean_probability(const Matrix& logits) {
  if (logits.size() == 0) return 0.0;
  double s = 0.0;
  for (double z : logits.values()) s += diff::sigmoid(z);
  return s / static_cast<double>(logits.size());
}

DiscStepResult discriminator_step(Discriminator& disc, diff::AdamState& opt, const Batch& expert,
                                  const Batch& policy, double max_norm, long step) {
  Tape tape;
  const BoundDiscriminator bound = disc.bind(tape, true);
  const Var ze = bound.logit(tape, tape.constant(expert.x), expert.cond);
  const Var zp = bound.logit(tape, tape.constant(policy.x), policy.cond);
  DiscStepResult out;
  out.expert_prob = mean_probability(ze.value());
  out.policy_prob = mean_probability(zp.value());
  const Var loss = disc_loss(ze, zp);
  const auto update = apply_update(tape, loss, bound.params(), disc.tensors(), opt, max_norm, step);
  disc.project_spectral();
  out.loss = update.loss;
  out.grad_norm = update.grad_norm;
  return out;
}

}  // namespace faillab::adversary
