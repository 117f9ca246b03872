// Copyright 2026 The fail-lab Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "doctest.h"
#include "faillab/diffcore/grad_check.hpp"
#include "faillab/fail_pg/fail_pg.hpp"
#include "test_states.hpp"

using faillab::ContractViolation;
using faillab::Matrix;
using faillab::Rng;
namespace diff = faillab::diff;
namespace flow = faillab::flow;
namespace adv = faillab::adversary;
namespace pg = faillab::fail_pg;
using diff::Tape;
using diff::Var;
using faillab::testing::gaussian_batch;
using faillab::testing::small_state;

namespace {

pg::PgConfig fast_config() {
  pg::PgConfig c;
  c.delta_t = 0.25;
  c.warmup.warmup_steps = 0;
  return c;
}

void perturb(flow::VectorField& vf, double scale, std::uint64_t seed) {
  Rng rng(seed);
  for (Matrix* m : vf.tensors())
    for (double& v : m->values()) v += scale * rng.normal();
}

double population_std(const std::vector<double>& v) {
  const double mean = std::accumulate(v.begin(), v.end(), 0.0) / v.size();
  double s = 0.0;
  for (double x : v) s += (x - mean) * (x - mean);
  return std::sqrt(s / v.size());
}

}  // namespace

TEST_CASE("grpo_advantages: hand values, degenerate groups and normalisation") {
  const std::vector<double> r{1, 2, 3};
  const auto a = pg::grpo_advantages(r, 1e-8);
  const double expected = 1.0 / std::sqrt(2.0 / 3.0);
  CHECK(a[0] == doctest::Approx(-expected).epsilon(1e-14));
  CHECK(a[1] == 0.0);
  CHECK(a[2] == doctest::Approx(expected).epsilon(1e-14));
  CHECK(a[2] == doctest::Approx(1.2247).epsilon(1e-4));
  for (double v : pg::grpo_advantages(std::vector<double>{5, 5, 5}, 1e-8)) CHECK(v == 0.0);
  for (double v : pg::grpo_advantages(std::vector<double>{0.1, 0.1, 0.1, 0.1}, 1e-8)) {
    CHECK(v == 0.0);
  }
  CHECK_THROWS_AS(pg::grpo_advantages(std::vector<double>{1.0}, 1e-8), ContractViolation);

  Rng rng(1);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> rewards(2 + rng.below(8));
    for (double& v : rewards) v = rng.uniform(-5.0, 5.0) * std::pow(10.0, rng.uniform(-3, 3));
    const auto adv = pg::grpo_advantages(rewards, 1e-8);
    CHECK(std::abs(std::accumulate(adv.begin(), adv.end(), 0.0)) / adv.size() < 1e-12);
    CHECK(std::abs(population_std(adv) - 1.0) < 1e-9);
  }
}

TEST_CASE("fpo_ratio: identity, hand value, monotonicity and clamp") {
  Tape tape;
  CHECK(pg::fpo_ratio(tape.constant(Matrix::scalar(0.5)), Matrix::scalar(1.0)).value().item() ==
        doctest::Approx(std::exp(0.5)).epsilon(1e-15));
  CHECK(pg::fpo_ratio(tape.constant(Matrix::scalar(0.5)), Matrix::scalar(1.0)).value().item() ==
        doctest::Approx(1.6487).epsilon(1e-4));
  CHECK(pg::fpo_ratio(tape.constant(Matrix::scalar(0.9)), Matrix::scalar(1.0)).value().item() >
        1.0);
  CHECK(pg::fpo_ratio(tape.constant(Matrix::scalar(1.1)), Matrix::scalar(1.0)).value().item() <
        1.0);
  std::size_t clamped = 0;
  const Var big = pg::fpo_ratio(tape.param(Matrix::from_rows({{0.0}, {1.0}})),
                                Matrix::from_rows({{40.0}, {1.0}}), &clamped);
  CHECK(clamped == 1);
  CHECK(big.value()[0] == std::exp(30.0));
  CHECK(big.value()[1] == 1.0);

  // θ = θ_old: tape-free and taped CFM losses agree bitwise, ratio is exactly 1.
  auto state = small_state(2, 2, 2);
  Rng rng(3);
  const auto samples = gaussian_batch(5, 2, 0.5, rng, 2);
  const auto draws = pg::CachedDraws::draw(5, 2, 4, rng);
  const Matrix old_loss = pg::cfm_per_sample(state.policy, samples, draws);
  Tape t2;
  const Var ratio =
      pg::fpo_ratio(pg::cfm_per_sample(state.policy.bind(t2, true), t2, samples, draws), old_loss);
  for (double v : ratio.value().values()) CHECK(v == 1.0);
}

TEST_CASE("fpo_loss: clip examples and min contract") {
  Tape tape;
  auto eval = [&](double r, double a) {
    return pg::fpo_loss(tape.constant(Matrix::scalar(r)), Matrix::scalar(a), 0.2).value().item();
  };
  CHECK(eval(1.5, 1.0) == doctest::Approx(1.2));
  CHECK(eval(1.5, -1.0) == -1.5);
  CHECK(eval(1.0, 0.7) == 0.7);
  CHECK(eval(1.0, -2.5) == -2.5);
  Rng rng(4);
  for (int i = 0; i < 1000; ++i) {
    const double r = std::exp(rng.uniform(-2.0, 2.0));
    const double a = rng.uniform(-3.0, 3.0);
    const double eps = rng.uniform(0.01, 0.9);
    const double v =
        pg::fpo_loss(tape.constant(Matrix::scalar(r)), Matrix::scalar(a), eps).value().item();
    CHECK(v <= r * a);
    CHECK(v <= std::clamp(r, 1.0 - eps, 1.0 + eps) * a);
  }
}

TEST_CASE("kl_estimate: self-KL, arithmetic and ordering") {
  Tape tape;
  CHECK(pg::kl_estimate(tape.constant(Matrix::scalar(0.3)), Matrix::scalar(0.8)).value().item() ==
        doctest::Approx(0.5).epsilon(1e-15));
  auto state = small_state(2, 1, 5);
  Rng rng(6);
  const auto samples = gaussian_batch(6, 2, 0.0, rng);
  const auto draws = pg::CachedDraws::draw(6, 2, 4, rng);
  const Matrix ref_loss = pg::cfm_per_sample(state.reference, samples, draws);
  Tape t2;
  CHECK(pg::kl_estimate(pg::cfm_per_sample(state.policy.bind(t2, true), t2, samples, draws),
                        ref_loss)
            .value()
            .item() == 0.0);
  const Matrix l = Matrix::from_rows({{0.1}, {0.7}, {0.4}});
  const Matrix lr = Matrix::from_rows({{0.9}, {0.2}, {0.5}});
  const Matrix l_perm = Matrix::from_rows({{0.4}, {0.1}, {0.7}});
  const Matrix lr_perm = Matrix::from_rows({{0.5}, {0.9}, {0.2}});
  CHECK(pg::kl_estimate(tape.constant(l), lr).value().item() ==
        doctest::Approx(pg::kl_estimate(tape.constant(l_perm), lr_perm).value().item())
            .epsilon(1e-15));
}

TEST_CASE("pg_policy_loss: FPO surrogate with KL passes grad_check") {
  for (std::uint64_t seed = 0; seed < 6; ++seed) {
    auto state = small_state(2, 2, 10 + seed);
    perturb(state.reference, 0.1, 100 + seed);
    const auto old_policy = state.policy;
    perturb(state.policy, seed % 2 == 0 ? 0.02 : 0.5, 200 + seed);
    Rng rng(30 + seed);
    const auto members = gaussian_batch(6, 2, 0.5, rng, 2);
    const auto draws = pg::CachedDraws::draw(6, 2, 3, rng);
    const Matrix l_old = pg::cfm_per_sample(old_policy, members, draws);
    const Matrix l_ref = pg::cfm_per_sample(state.reference, members, draws);
    const Matrix advantages = rng.normal_matrix(6, 1);
    const auto config = fast_config();
    std::vector<Matrix> params;
    for (const Matrix* m : state.policy.tensors()) params.push_back(*m);
    const diff::Objective f = [&](Tape& tape, std::span<const Var> p) {
      const flow::BoundVectorField field(state.policy, {p.begin(), p.end()});
      return pg::pg_policy_loss(field, tape, members, draws, l_old, l_ref, advantages, config);
    };
    const auto report = diff::grad_check(f, params, 1e-5);
    INFO("seed " << seed << " worst " << report.max_rel_error);
    CHECK(report.passed(1e-6));
  }
}

TEST_CASE("rewards and advantages carry no gradient to the policy") {
  auto state = small_state(2, 1, 7);
  Tape tape;
  const Var x = tape.param(Matrix::from_rows({{0.3, -0.2}, {1.0, 0.5}}));
  const Var logits = state.disc.bind(tape, false).logit(tape, x, std::vector<int>{0, 0});
  // Rewards are read off the tape as plain values before entering the surrogate.
  const Matrix rewards = adv::pg_reward(logits.value());
  const Matrix advantages = pg::group_advantages(rewards, 2, 1e-8);
  const auto members = adv::Batch{x.value(), {0, 0}};
  Rng rng(8);
  const auto draws = pg::CachedDraws::draw(2, 2, 2, rng);
  const Matrix l_old = pg::cfm_per_sample(state.policy, members, draws);
  const auto field = state.policy.bind(tape, true);
  const Var loss =
      pg::pg_policy_loss(field, tape, members, draws, l_old, l_old, advantages, fast_config());
  tape.backward(loss);
  const auto grads = tape.gradients(std::vector<Var>{x});
  for (double g : grads[0].values()) CHECK(g == 0.0);
}

TEST_CASE("pg_train_step: trust-region centre, degenerate groups and frozen reference") {
  SUBCASE("first inner epoch: surrogate equals mean advantage 0 with a nonzero gradient") {
    auto state = small_state(2, 1, 9);
    const auto reference = state.reference;
    Rng data(10);
    for (int i = 0; i < 5; ++i) {
      const auto m = pg::pg_train_step(state, fast_config(), gaussian_batch(6, 2, 2.0, data));
      CHECK(m.policy_updated);
      CHECK(std::abs(m.surrogate) < 1e-12);
      CHECK(m.policy_grad_norm > 0.0);
    }
    CHECK(state.reference == reference);
  }
  SUBCASE("constant discriminator: zero advantages, update is the KL term alone") {
    auto state = small_state(2, 1, 11);
    auto& last = state.disc.head.layers.back();
    last.weight = Matrix(last.weight.rows(), last.weight.cols());
    last.bias = Matrix(1, 1);
    pg::RewardSources sources;
    sources.update_disc = false;
    Rng data(12);
    const auto expert = gaussian_batch(4, 2, 2.0, data);
    const auto m = pg::policy_gradient_step(state, fast_config(), expert, sources);
    CHECK(m.surrogate == 0.0);
    CHECK(m.kl == 0.0);  // θ = θ_ref on the first step
    CHECK(m.policy_grad_norm > 0.0);
    CHECK(m.reward_mean == doctest::Approx(std::log(2.0)).epsilon(1e-15));
  }
  SUBCASE("beta 0 and constant rewards leave the policy unchanged") {
    auto state = small_state(2, 1, 13);
    auto& last = state.disc.head.layers.back();
    last.weight = Matrix(last.weight.rows(), last.weight.cols());
    last.bias = Matrix(1, 1);
    auto config = fast_config();
    config.beta_kl = 0.0;
    pg::RewardSources sources;
    sources.update_disc = false;
    Rng data(14);
    const auto before = state.policy;
    pg::policy_gradient_step(state, config, gaussian_batch(4, 2, 2.0, data), sources);
    CHECK(state.policy == before);
  }
  SUBCASE("warmup freezes the policy and determinism holds") {
    auto config = fast_config();
    config.warmup.warmup_steps = 3;
    config.inner_epochs = 2;
    auto run = [&] {
      auto state = small_state(2, 2, 15);
      const auto initial = state.policy;
      Rng data(16);
      for (int i = 0; i < 5; ++i) {
        const auto m = pg::pg_train_step(state, config, gaussian_batch(4, 2, 1.0, data, 2));
        CHECK(m.policy_updated == (i >= 3));
        if (i < 3) CHECK(state.policy == initial);
      }
      return state;
    };
    CHECK(run() == run());
  }
}

TEST_CASE("group_members layout and PgConfig validation") {
  const adv::Batch rollouts{Matrix::from_rows({{1}, {2}, {3}, {4}}), {0, 0, 1, 1}};
  const adv::Batch expert{Matrix::from_rows({{10}, {20}}), {0, 1}};
  const auto members = pg::group_members(rollouts, expert, 2, true);
  CHECK(members.x == Matrix::from_rows({{1}, {2}, {10}, {3}, {4}, {20}}));
  CHECK(members.cond == std::vector<int>{0, 0, 0, 1, 1, 1});
  CHECK(pg::group_members(rollouts, expert, 2, false).x == rollouts.x);

  pg::PgConfig c;
  CHECK_NOTHROW(c.validate());
  c.group_size = 1;
  CHECK_THROWS_WITH_AS(c.validate(), doctest::Contains("G >= 2"), faillab::ConfigurationError);
  c = pg::PgConfig{};
  c.clip_eps = 1.0;
  CHECK_THROWS_AS(c.validate(), faillab::ConfigurationError);
  c = pg::PgConfig{};
  c.beta_kl = -0.1;
  CHECK_THROWS_AS(c.validate(), faillab::ConfigurationError);
}
