// Copyright 2026 The fail-lab Authors
// SPDX-License-Identifier: Apache-2.0

#include <vector>

#include "doctest.h"
#include "faillab/diffcore/grad_check.hpp"
#include "faillab/fail_pd/fail_pd.hpp"
#include "test_states.hpp"

using faillab::Matrix;
using faillab::Rng;
namespace diff = faillab::diff;
namespace flow = faillab::flow;
namespace adv = faillab::adversary;
namespace pd = faillab::fail_pd;
using diff::Tape;
using diff::Var;
using faillab::testing::gaussian_batch;
using faillab::testing::small_state;
using faillab::testing::tensors_equal;

namespace {

pd::PdConfig fast_config() {
  pd::PdConfig c;
  c.delta_t = 0.25;
  return c;
}

}  // namespace

TEST_CASE("pd_train_step: policy frozen during warmup, first change at warmup_steps") {
  auto state = small_state(2, 1, 1);
  auto config = fast_config();
  config.warmup.warmup_steps = 25;
  Rng data(2);
  const auto initial = state.policy;
  for (int i = 0; i < 25; ++i) {
    const auto disc_before = state.disc;
    const auto m = pd::pd_train_step(state, config, gaussian_batch(8, 2, 2.0, data));
    CHECK_FALSE(m.policy_updated);
    CHECK(state.policy == initial);
    CHECK_FALSE(state.disc == disc_before);
  }
  CHECK(state.policy_opt.step == 0);
  const auto m = pd::pd_train_step(state, config, gaussian_batch(8, 2, 2.0, data));
  CHECK(m.policy_updated);
  CHECK_FALSE(state.policy == initial);
  CHECK(state.step == 26);
}

TEST_CASE("pd_train_step: bitwise reproducible for a fixed seed") {
  auto config = fast_config();
  config.group_size = 1;
  config.hybrid_bc_weight = 0.0;
  config.warmup.warmup_steps = 2;
  auto run = [&] {
    auto state = small_state(2, 2, 3);
    Rng data(4);
    std::vector<double> trace;
    for (int i = 0; i < 8; ++i) {
      const auto m = pd::pd_train_step(state, config, gaussian_batch(6, 2, 1.0, data, 2));
      trace.insert(trace.end(), {m.disc_loss, m.gen_loss, m.expert_prob, m.policy_prob,
                                 m.disc_grad_norm, m.policy_grad_norm});
    }
    return std::make_pair(trace, state);
  };
  const auto a = run();
  const auto b = run();
  CHECK(a.first == b.first);
  CHECK(a.second == b.second);
}

TEST_CASE("pathwise_step: each player's update touches only its own parameters") {
  auto state = small_state(2, 1, 5);
  auto config = fast_config();
  config.warmup.warmup_steps = 0;
  Rng data(6);
  {
    // Policy step alone.
    const auto disc_before = state.disc;
    const auto policy_before = state.policy;
    pd::PathwiseTerms terms;
    terms.update_disc = false;
    pd::pathwise_step(state, config, gaussian_batch(8, 2, 2.0, data), terms);
    CHECK(state.disc == disc_before);
    CHECK_FALSE(state.policy == policy_before);
  }
  {
    // Discriminator step alone.
    config.warmup.warmup_steps = 1000;
    const auto disc_before = state.disc;
    const auto policy_before = state.policy;
    pd::pd_train_step(state, config, gaussian_batch(8, 2, 2.0, data));
    CHECK_FALSE(state.disc == disc_before);
    CHECK(state.policy == policy_before);
  }
}

TEST_CASE("pathwise_step: constant discriminator and no anchor give a zero policy gradient") {
  auto state = small_state(2, 1, 7);
  auto& last = state.disc.head.layers.back();
  last.weight = Matrix(last.weight.rows(), last.weight.cols());
  last.bias = Matrix(1, 1);
  auto config = fast_config();
  config.warmup.warmup_steps = 0;
  config.hybrid_bc_weight = 0.0;
  pd::PathwiseTerms terms;
  terms.update_disc = false;
  Rng data(8);
  const auto before = state.policy;
  const auto m = pd::pathwise_step(state, config, gaussian_batch(8, 2, 2.0, data), terms);
  CHECK(m.policy_updated);
  CHECK(m.policy_grad_norm == 0.0);
  CHECK(m.gen_loss == doctest::Approx(std::log(2.0)).epsilon(1e-15));
  CHECK(state.policy == before);
}

TEST_CASE("pathwise policy loss: full composition passes grad_check") {
  const faillab::testing::QuadraticReward reward(0.5);
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    auto state = small_state(2, 2, 20 + seed);
    Rng rng(40 + seed);
    auto rollout = adv::sample_rollouts(state.policy, {0, 1, 1, 0}, 4, rng);
    Matrix t(4, 1);
    for (double& v : t.values()) v = rng.uniform(0.0, flow::max_denoise_time(0.25));
    const auto expert = gaussian_batch(3, 2, 1.0, rng, 2);
    const auto bc = flow::draw_sample(expert.x, expert.cond, rng);
    pd::PathwiseTerms terms;
    terms.reward = &reward;
    terms.reward_weight = 0.3;
    std::vector<Matrix> params;
    for (const Matrix* m : state.policy.tensors()) params.push_back(*m);
    const diff::Objective f = [&](Tape& tape, std::span<const Var> p) {
      const flow::BoundVectorField field(state.policy, {p.begin(), p.end()});
      return pd::pathwise_policy_loss(field, tape, state.disc, rollout, t, 0.25, terms, 0.1, bc);
    };
    const auto report = diff::grad_check(f, params, 1e-5);
    INFO("seed " << seed << " worst " << report.max_rel_error);
    CHECK(report.passed(1e-6));
  }
}

TEST_CASE("PdConfig validation") {
  pd::PdConfig c;
  CHECK_NOTHROW(c.validate());
  c.group_size = 0;
  CHECK_THROWS_AS(c.validate(), faillab::ConfigurationError);
  c = pd::PdConfig{};
  c.hybrid_bc_weight = -1.0;
  CHECK_THROWS_AS(c.validate(), faillab::ConfigurationError);
  c = pd::PdConfig{};
  c.delta_t = 0.0;
  CHECK_THROWS_AS(c.validate(), faillab::ConfigurationError);
}
