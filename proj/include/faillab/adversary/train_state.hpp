// Copyright 2026 The fail-lab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "faillab/adversary/discriminator.hpp"
#include "faillab/diffcore/optim.hpp"
#include "faillab/flow/vector_field.hpp"

namespace faillab::adversary {

/// Points with one class label per row.
struct Batch {
  Matrix x;
  std::vector<int> cond;

  std::size_t size() const { return x.rows(); }
  /// Each label repeated `times` times in place: c0 c0 c0 c1 c1 c1 ...
  std::vector<int> repeated_cond(std::size_t times) const;
};

/// A loss or update became non-finite at `step`.
class DivergenceError : public NumericalError {
 public:
  DivergenceError(const std::string& what, long step) : NumericalError(what), step_(step) {}
  long step() const { return step_; }

 private:
  long step_;
};

/// A differentiable scalar reward per row.
class Reward {
 public:
  virtual ~Reward() = default;
  /// B x 1 rewards recorded on the tape.
  virtual Var on_tape(Tape& tape, Var x) const = 0;
  virtual Matrix eval(const Matrix& x) const = 0;
};

/// Everything that changes during training. Random draws for step i come
/// from streams keyed by (seed, name, i), so a state restored from a
/// checkpoint continues exactly as the uninterrupted run would.
struct TrainState {
  flow::VectorField policy;
  flow::VectorField reference;
  Discriminator disc;
  diff::AdamState policy_opt;
  diff::AdamState disc_opt;
  long step = 0;
  std::uint64_t seed = 0;

  /// Fresh optimizer moments; the reference policy is a copy of `policy`.
  static TrainState create(flow::VectorField policy, Discriminator disc,
                           diff::AdamHyper policy_hyper, diff::AdamHyper disc_hyper,
                           std::uint64_t seed);

  Rng stream(std::string_view name) const;

  friend bool operator==(const TrainState&, const TrainState&) = default;
};

struct UpdateResult {
  double loss = 0.0;
  double grad_norm = 0.0;
};

/// Backpropagates `loss`, clips the gradients of `bound` to `max_norm` and
/// applies one AdamW step to `params`. Non-finite losses or gradients raise
/// DivergenceError before any parameter changes.
UpdateResult apply_update(Tape& tape, Var loss, std::span<const Var> bound,
                          std::span<Matrix* const> params, diff::AdamState& opt, double max_norm,
                          long step);

/// One discriminator step on disc_loss(expert, policy), followed by the
/// spectral projection when enabled.
struct DiscStepResult {
  double loss = 0.0;
  double grad_norm = 0.0;
  double expert_prob = 0.0;  // mean σ(D) on the expert batch before the step
  double policy_prob = 0.0;
};
DiscStepResult discriminator_step(Discriminator& disc, diff::AdamState& opt, const Batch& expert,
                                  const Batch& policy, double max_norm, long step);

/// Policy samples drawn without recording gradients, with the noise that
/// produced them.
struct Rollout {
  Batch batch;
  Matrix eps;
};
Rollout sample_rollouts(const flow::VectorField& policy, std::vector<int> cond, std::size_t n_steps,
                        Rng& rng);

/// Mean of σ over a logit column.
double mean_probability(const Matrix& logits);

}  // namespace faillab::adversary
