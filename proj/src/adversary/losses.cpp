// Copyright 2026 The fail-lab Authors
// SPDX-License-Identifier: Apache-2.0

#include "faillab/adversary/losses.hpp"

namespace faillab::adversary {
namespace {

void require_logits(Var z, const char* what) {
  if (z.cols() != 1) throw ContractViolation(std::string(what) + " logits must be a column");
  if (z.rows() == 0) throw ContractViolation(std::string(what) + " batch is empty");
}

}  // namespace

Var disc_loss(Var expert_logits, Var policy_logits) {
  require_logits(expert_logits, "expert");
  require_logits(policy_logits, "policy");
  // log(1 − σ(z)) = log σ(−z).
  return diff::mean(diff::softplus(-expert_logits)) + diff::mean(diff::softplus(policy_logits));
}

Var disc_loss(const BoundDiscriminator& d, Tape& tape, Var expert_x,
              std::span<const int> expert_cond, Var policy_x, std::span<const int> policy_cond) {
  if (expert_x.rows() == 0 || policy_x.rows() == 0) {
    throw ContractViolation("disc_loss needs non-empty batches");
  }
  return disc_loss(d.logit(tape, expert_x, expert_cond), d.logit(tape, policy_x, policy_cond));
}

Var generator_pd_loss(Var logits) {
  require_logits(logits, "generator");
  return diff::mean(diff::softplus(-logits));
}

Var generator_pd_loss(const BoundDiscriminator& d, Tape& tape, Var x0_prime,
                      std::span<const int> cond) {
  return generator_pd_loss(d.logit(tape, x0_prime, cond));
}

Matrix pg_reward(const Matrix& logits) {
  Matrix r = logits;
  for (double& v : r.values()) v = diff::softplus(v);
  return r;
}

Matrix pg_reward(const Discriminator& d, const Matrix& x, std::span<const int> cond) {
  return pg_reward(d.logit(x, cond));
}

double probe_accuracy(const Matrix& expert_logits, const Matrix& policy_logits) {
  const std::size_t n = expert_logits.size() + policy_logits.size();
  if (n == 0) throw ContractViolation("probe accuracy needs samples");
  std::size_t correct = 0;
  for (double z : expert_logits.values()) correct += z >= 0.0 ? 1 : 0;
  for (double z : policy_logits.values()) correct += z < 0.0 ? 1 : 0;
  return static_cast<double>(correct) / static_cast<double>(n);
}

}  // namespace faillab::adversary
