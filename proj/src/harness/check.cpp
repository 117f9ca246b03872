// Copyright 2026 The fail-lab Authors
// SPDX-License-Identifier: Apache-2.0

#include "faillab/harness/check.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numeric>
#include <sstream>

#include "faillab/adversary/losses.hpp"
#include "faillab/adversary/spectral_norm.hpp"
#include "faillab/baselines/baselines.hpp"
#include "faillab/diffcore/grad_check.hpp"
#include "faillab/fail_pd/fail_pd.hpp"
#include "faillab/fail_pg/fail_pg.hpp"
#include "faillab/flow/flow.hpp"
#include "faillab/harness/checkpoint.hpp"
#include "faillab/harness/run.hpp"

namespace faillab::harness {
namespace {

using adversary::Batch;
using adversary::TrainState;
using diff::Tape;
using diff::Var;

constexpr std::size_t kDim = 2;
constexpr std::size_t kClasses = 2;
constexpr double kDeltaT = 0.1;
constexpr double kStep = 1e-5;

/// Returns a fixed velocity whatever the input.
class FixedField final : public flow::VelocityField {
 public:
  explicit FixedField(Matrix v) : v_(std::move(v)) {}
  Var on_tape(Tape& tape, Var, const Matrix&, std::span<const int>) const override {
    return tape.constant(v_);
  }
  Matrix eval(const Matrix&, const Matrix&, std::span<const int>) const override { return v_; }

 private:
  Matrix v_;
};

TrainState instance_state(std::uint64_t seed, adversary::DiscVariant variant) {
  Rng rng(seed, "check_init");
  const std::size_t hidden[] = {6, 5};
  auto policy = flow::VectorField::create(kDim, kClasses, hidden, diff::Activation::kTanh, rng);
  adversary::DiscriminatorSpec spec;
  spec.variant = variant;
  spec.hidden = {6, 5};
  spec.feature_width = 6;
  auto disc = adversary::Discriminator::create(spec, kDim, kClasses, rng, &policy);
  auto state = TrainState::create(std::move(policy), std::move(disc), {}, {}, seed);
  for (Matrix* m : state.reference.tensors())
    for (double& v : m->values()) v += 0.1 * rng.normal();
  return state;
}

Batch random_batch(std::size_t n, Rng& rng) {
  Batch b{rng.normal_matrix(n, kDim), std::vector<int>(n)};
  for (std::size_t i = 0; i < n; ++i) b.cond[i] = static_cast<int>(i % kClasses);
  return b;
}

std::vector<Matrix> copy_tensors(const std::vector<const Matrix*>& ptrs) {
  std::vector<Matrix> out;
  for (const Matrix* m : ptrs) out.push_back(*m);
  return out;
}

std::vector<Matrix> policy_params(const TrainState& s) {
  return copy_tensors(s.policy.tensors());
}

/// Runs `make(instance)` -> report for each instance, keeping the worst.
template <class Make>
CheckResult grad_family(const std::string& name, const CheckOptions& options, Make make) {
  double worst = 0.0;
  int failures = 0;
  std::string first_failure;
  for (int i = 0; i < options.instances; ++i) {
    const diff::GradCheckReport report = make(static_cast<std::uint64_t>(i));
    worst = std::max(worst, report.max_rel_error);
    if (!report.passed(options.grad_tolerance)) {
      ++failures;
      if (first_failure.empty()) {
        first_failure = "instance " + std::to_string(i) +
                        (report.finite ? "" : " non-finite: " + report.failure);
      }
    }
  }
  std::ostringstream detail;
  detail << options.instances << " instances, worst relative error " << worst;
  if (failures > 0) detail << ", " << failures << " failed (" << first_failure << ")";
  return {"grad_check " + name, failures == 0, detail.str()};
}

Matrix uniform_times(std::size_t n, double hi, Rng& rng) {
  Matrix t(n, 1);
  for (double& v : t.values()) v = rng.uniform(0.0, hi);
  return t;
}

fail_pg::PgConfig check_pg_config(double beta_kl) {
  fail_pg::PgConfig c;
  c.delta_t = kDeltaT;
  c.beta_kl = beta_kl;
  return c;
}

CheckResult pathwise_family(const std::string& name, const CheckOptions& options,
                            bool with_reward) {
  return grad_family(name, options, [&](std::uint64_t seed) {
    auto state = instance_state(1000 + seed, adversary::DiscVariant::kScratch);
    Rng rng(seed, "check_pathwise");
    const std::vector<int> cond{0, 1, 0, 1, 1};
    const auto rollout = adversary::sample_rollouts(state.policy, cond, 4, rng);
    const Matrix t = uniform_times(cond.size(), flow::max_denoise_time(kDeltaT), rng);
    const Batch expert = random_batch(4, rng);
    const auto bc = flow::draw_sample(expert.x, expert.cond, rng);
    const baselines::StaticReward reward(baselines::RewardKind::kPointAttractor, {0.5, -0.5}, 1.0);
    fail_pd::PathwiseTerms terms;
    if (with_reward) {
      terms.reward = &reward;
      terms.reward_weight = 0.7;
    }
    const double bc_weight = with_reward ? 0.1 : 0.0;
    const diff::Objective f = [&](Tape& tape, std::span<const Var> p) {
      const flow::BoundVectorField field(state.policy, {p.begin(), p.end()});
      return fail_pd::pathwise_policy_loss(field, tape, state.disc, rollout, t, kDeltaT, terms,
                                           bc_weight, bc);
    };
    return diff::grad_check(f, policy_params(state), kStep);
  });
}

CheckResult pg_family(const std::string& name, const CheckOptions& options, double beta_kl) {
  return grad_family(name, options, [&](std::uint64_t seed) {
    auto state = instance_state(2000 + seed, adversary::DiscVariant::kScratch);
    Rng rng(seed, "check_pg");
    const auto old_policy = state.policy;
    for (Matrix* m : state.policy.tensors())
      for (double& v : m->values()) v += (seed % 2 == 0 ? 0.02 : 0.3) * rng.normal();
    const Batch members = random_batch(6, rng);
    const auto draws = fail_pg::CachedDraws::draw(6, kDim, 3, rng);
    const Matrix l_old = fail_pg::cfm_per_sample(old_policy, members, draws);
    const Matrix l_ref = fail_pg::cfm_per_sample(state.reference, members, draws);
    const Matrix advantages = rng.normal_matrix(6, 1);
    const auto config = check_pg_config(beta_kl);
    const diff::Objective f = [&](Tape& tape, std::span<const Var> p) {
      const flow::BoundVectorField field(state.policy, {p.begin(), p.end()});
      return fail_pg::pg_policy_loss(field, tape, members, draws, l_old, l_ref, advantages,
                                     config);
    };
    return diff::grad_check(f, policy_params(state), kStep);
  });
}

std::string fmt(double v) {
  std::ostringstream s;
  s << v;
  return s.str();
}

}  // namespace

std::vector<CheckResult> gradient_checks(const CheckOptions& options) {
  std::vector<CheckResult> out;
  out.push_back(grad_family("cfm_loss", options, [](std::uint64_t seed) {
    const auto state = instance_state(seed, adversary::DiscVariant::kScratch);
    Rng rng(seed, "check_cfm");
    const Batch b = random_batch(5, rng);
    const auto sample = flow::draw_sample(b.x, b.cond, rng);
    const diff::Objective f = [&](Tape& tape, std::span<const Var> p) {
      const flow::BoundVectorField field(state.policy, {p.begin(), p.end()});
      return flow::cfm_loss(field, tape, sample);
    };
    return diff::grad_check(f, policy_params(state), kStep);
  }));
  out.push_back(grad_family("disc_loss", options, [](std::uint64_t seed) {
    const adversary::DiscVariant variants[] = {adversary::DiscVariant::kScratch,
                                               adversary::DiscVariant::kFlowFeature,
                                               adversary::DiscVariant::kFrozenFeature};
    const auto state = instance_state(500 + seed, variants[seed % 3]);
    Rng rng(seed, "check_disc");
    const Batch expert = random_batch(5, rng);
    const Batch policy = random_batch(4, rng);
    const diff::Objective f = [&](Tape& tape, std::span<const Var> p) {
      const adversary::BoundDiscriminator d(state.disc, {p.begin(), p.end()});
      return adversary::disc_loss(d, tape, tape.constant(expert.x), expert.cond,
                                  tape.constant(policy.x), policy.cond);
    };
    return diff::grad_check(f, copy_tensors(state.disc.tensors()), kStep);
  }));
  out.push_back(pathwise_family("generator_pd_loss", options, false));
  out.push_back(pathwise_family("combined pathwise loss", options, true));
  out.push_back(pg_family("fpo surrogate", options, 0.0));
  out.push_back(pg_family("combined pg loss", options, 0.05));
  out.push_back(grad_family("kl_estimate", options, [](std::uint64_t seed) {
    auto state = instance_state(3000 + seed, adversary::DiscVariant::kScratch);
    Rng rng(seed, "check_kl");
    const Batch members = random_batch(5, rng);
    const auto draws = fail_pg::CachedDraws::draw(5, kDim, 2, rng);
    const Matrix l_ref = fail_pg::cfm_per_sample(state.reference, members, draws);
    const diff::Objective f = [&](Tape& tape, std::span<const Var> p) {
      const flow::BoundVectorField field(state.policy, {p.begin(), p.end()});
      return fail_pg::kl_estimate(fail_pg::cfm_per_sample(field, tape, members, draws), l_ref);
    };
    return diff::grad_check(f, policy_params(state), kStep);
  }));
  out.push_back(grad_family("dpo_loss", options, [](std::uint64_t seed) {
    auto state = instance_state(4000 + seed, adversary::DiscVariant::kScratch);
    Rng rng(seed, "check_dpo");
    const Batch winners = random_batch(4, rng);
    const Batch losers = random_batch(4, rng);
    const auto draws = fail_pg::CachedDraws::draw(4, kDim, 2, rng);
    const Matrix ref_w = fail_pg::cfm_per_sample(state.reference, winners, draws);
    const Matrix ref_l = fail_pg::cfm_per_sample(state.reference, losers, draws);
    const diff::Objective f = [&](Tape& tape, std::span<const Var> p) {
      const flow::BoundVectorField field(state.policy, {p.begin(), p.end()});
      return baselines::dpo_loss(fail_pg::cfm_per_sample(field, tape, winners, draws),
                                 fail_pg::cfm_per_sample(field, tape, losers, draws), ref_w,
                                 ref_l, 1.0);
    };
    return diff::grad_check(f, policy_params(state), kStep);
  }));
  return out;
}

std::vector<CheckResult> exactness_checks(const CheckOptions& options) {
  std::vector<CheckResult> out;
  Rng rng(7, "check_exact");
  const Matrix x0 = rng.normal_matrix(3, kDim);
  const Matrix eps = rng.normal_matrix(3, kDim);
  Matrix velocity = eps;
  for (std::size_t i = 0; i < velocity.size(); ++i) velocity[i] -= x0[i];
  const FixedField exact(velocity);
  const std::vector<int> cond(3, 0);

  double worst = 0.0;
  for (int i = 0; i < 10; ++i) {
    const double dt = 0.005 + 0.5 * i / 9.0;
    for (int j = 0; j < 10; ++j) {
      const double t = flow::max_denoise_time(dt) * j / 9.0;
      Tape tape;
      const Var x = flow::single_step_denoise(exact, tape, x0, eps, Matrix(3, 1, t), dt, cond);
      worst = std::max(worst, max_abs_diff(x.value(), x0));
    }
  }
  out.push_back({"single_step_denoise exact on a 10x10 (t, dt) grid",
                 worst < options.exactness_tolerance, "max abs error " + fmt(worst)});

  worst = 0.0;
  for (std::size_t n : {1u, 7u, 28u}) {
    worst = std::max(worst, max_abs_diff(flow::euler_sample(exact, eps, cond, n), x0));
  }
  out.push_back({"euler_sample exact for n_steps in {1, 7, 28}",
                 worst < options.exactness_tolerance, "max abs error " + fmt(worst)});
  return out;
}

std::vector<CheckResult> identity_checks() {
  std::vector<CheckResult> out;
  {
    const auto state = instance_state(9, adversary::DiscVariant::kScratch);
    Rng rng(9, "check_identity");
    const Batch members = random_batch(6, rng);
    const auto draws = fail_pg::CachedDraws::draw(6, kDim, 4, rng);
    const Matrix l_old = fail_pg::cfm_per_sample(state.policy, members, draws);
    Tape tape;
    const auto bound = state.policy.bind(tape, true);
    const Var l_theta = fail_pg::cfm_per_sample(bound, tape, members, draws);
    const Matrix ratio = fail_pg::fpo_ratio(l_theta, l_old).value();
    const bool ones = std::all_of(ratio.values().begin(), ratio.values().end(),
                                  [](double r) { return r == 1.0; });
    out.push_back({"fpo_ratio(theta_old) == 1", ones, ""});
    const Matrix l_self = fail_pg::cfm_per_sample(state.policy, members, draws);
    const double kl = fail_pg::kl_estimate(l_theta, l_self).value().item();
    out.push_back({"kl_estimate(theta, theta) == 0", kl == 0.0, "kl " + fmt(kl)});
  }
  {
    const std::vector<double> rewards{0.3, 1.7, -0.4, 2.2, 0.9};
    const auto adv = fail_pg::grpo_advantages(rewards, 1e-8);
    const double mean = std::accumulate(adv.begin(), adv.end(), 0.0) / adv.size();
    double var = 0.0;
    for (double a : adv) var += (a - mean) * (a - mean);
    const double sd = std::sqrt(var / adv.size());
    out.push_back({"grpo_advantages mean 0 and population std 1",
                   std::abs(mean) <= 1e-12 && std::abs(sd - 1.0) <= 1e-9,
                   "mean " + fmt(mean) + " std " + fmt(sd)});
    const std::vector<double> flat{0.5, 0.5, 0.5};
    const auto zero = fail_pg::grpo_advantages(flat, 1e-8);
    out.push_back({"grpo_advantages of equal rewards are zero",
                   std::all_of(zero.begin(), zero.end(), [](double a) { return a == 0.0; }), ""});
  }
  {
    Tape tape;
    auto surrogate = [&](double ratio, double adv) {
      return fail_pg::fpo_loss(tape.constant(Matrix::scalar(ratio)), Matrix::scalar(adv), 0.2)
          .value()
          .item();
    };
    const double up = surrogate(1.5, 1.0);
    const double down = surrogate(1.5, -1.0);
    const double centre = surrogate(1.0, -0.7);
    out.push_back({"fpo_loss clip contract", up == 1.2 && down == -1.5 && centre == -0.7,
                   "(1.5, 1) -> " + fmt(up) + ", (1.5, -1) -> " + fmt(down) + ", (1, -0.7) -> " +
                       fmt(centre)});
  }
  return out;
}

std::vector<CheckResult> persistence_checks() {
  std::vector<CheckResult> out;
  {
    auto state = instance_state(11, adversary::DiscVariant::kScratch);
    state.disc.spectral_norm = true;
    state.disc.project_spectral();
    double worst = 0.0;
    for (const auto& layer : state.disc.head.layers) {
      Matrix u;
      worst = std::max(worst, adversary::leading_singular_value(layer.weight, u, 200));
    }
    out.push_back({"spectral normalization bounds every head layer", worst <= 1.0 + 1e-6,
                   "largest singular value " + fmt(worst)});
  }
  {
    ExperimentConfig config;
    config.target = target_preset("two_mode_2d");
    config.policy_hidden = {6, 5};
    config.disc.hidden = {6, 5};
    config.batch_size = 4;
    config.warmup_steps = 0;
    config.method = Method::kFailPg;
    auto state = initial_state(config);
    for (long i = 0; i < 3; ++i) train_step(config, state, expert_batch(config, config.target, i));
    const auto restored = checkpoint_from_json(
        nlohmann::json::parse(checkpoint_to_json(config, state).dump()));
    out.push_back({"checkpoint round-trip is bitwise",
                   restored.state == state && restored.config == config, ""});
  }
  return out;
}

std::vector<CheckResult> run_check_suite(const CheckOptions& options) {
  std::vector<CheckResult> out = gradient_checks(options);
  for (auto group : {exactness_checks(options), identity_checks(), persistence_checks()}) {
    out.insert(out.end(), group.begin(), group.end());
  }
  return out;
}

}  // namespace faillab::harness
