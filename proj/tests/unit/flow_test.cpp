// Copyright 2026 The fail-lab Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <vector>

#include "doctest.h"
#include "faillab/diffcore/grad_check.hpp"
#include "faillab/flow/flow.hpp"
#include "test_fields.hpp"

using faillab::ContractViolation;
using faillab::Matrix;
using faillab::Rng;
namespace diff = faillab::diff;
namespace flow = faillab::flow;
using diff::Tape;
using diff::Var;
using faillab::testing::ConstantField;

namespace {

flow::VectorField small_field(std::size_t dim, std::size_t classes, std::uint64_t seed) {
  Rng rng(seed);
  const std::size_t hidden[] = {6, 5};
  return flow::VectorField::create(dim, classes, hidden, diff::Activation::kTanh, rng);
}

std::vector<Matrix> tensors_of(const flow::VectorField& vf) {
  std::vector<Matrix> out;
  for (const Matrix* m : vf.tensors()) out.push_back(*m);
  return out;
}

}  // namespace

TEST_CASE("interpolate: endpoints and midpoint") {
  Rng rng(1);
  const Matrix x0 = rng.normal_matrix(4, 3);
  const Matrix eps = rng.normal_matrix(4, 3);
  CHECK(flow::interpolate(x0, eps, 0.0) == x0);
  CHECK(flow::interpolate(x0, eps, 1.0) == eps);
  CHECK(flow::interpolate(Matrix::scalar(0.0), Matrix::scalar(1.0), 0.5).item() == 0.5);
  CHECK_THROWS_AS(flow::interpolate(x0, eps, 1.5), ContractViolation);
  CHECK_THROWS_AS(flow::interpolate(x0, eps, -0.1), ContractViolation);
}

TEST_CASE("cfm_loss: zero network, exact velocity and straight-line formula") {
  {
    ConstantField zero(Matrix(1, 1));
    Tape tape;
    const auto s = flow::FlowSample::make(Matrix::scalar(1.0), Matrix::scalar(0.0),
                                          Matrix::scalar(0.3), {0});
    CHECK(flow::cfm_loss(zero, tape, s).value().item() == 1.0);
  }
  {
    Rng rng(2);
    const Matrix x0 = rng.normal_matrix(5, 2);
    const Matrix eps = rng.normal_matrix(5, 2);
    Matrix velocity = eps;
    for (std::size_t i = 0; i < velocity.size(); ++i) velocity[i] -= x0[i];
    ConstantField exact(velocity);
    Tape tape;
    const auto s = flow::FlowSample::make(x0, eps, Matrix(5, 1, 0.4), {0, 0, 0, 0, 0});
    CHECK(flow::cfm_loss(exact, tape, s).value().item() == 0.0);
  }
  {
    const auto vf = small_field(2, 3, 3);
    Rng rng(4);
    const Matrix x0 = rng.normal_matrix(6, 2);
    const Matrix eps = rng.normal_matrix(6, 2);
    Matrix t(6, 1);
    for (double& v : t.values()) v = rng.uniform();
    const std::vector<int> cond{0, 1, 2, 2, 1, 0};
    const auto s = flow::FlowSample::make(x0, eps, t, cond);
    Tape tape;
    const double loss = flow::cfm_loss(vf.bind(tape, true), tape, s).value().item();

    // Direct evaluation of the formula, point by point.
    double expected = 0.0;
    for (std::size_t r = 0; r < 6; ++r) {
      Matrix xr(1, 2);
      for (std::size_t c = 0; c < 2; ++c) xr(0, c) = (1 - t[r]) * x0(r, c) + t[r] * eps(r, c);
      const int cr[] = {cond[r]};
      const Matrix v = vf.velocity(xr, Matrix::scalar(t[r]), cr);
      double se = 0.0;
      for (std::size_t c = 0; c < 2; ++c) {
        const double d = v[c] - (eps(r, c) - x0(r, c));
        se += d * d;
      }
      expected += se / 2.0;
    }
    expected /= 6.0;
    CHECK(loss == doctest::Approx(expected).epsilon(1e-13));
  }
}

TEST_CASE("euler_sample: zero field, oracle field and a single step") {
  Rng rng(5);
  const Matrix eps = rng.normal_matrix(4, 2);
  const std::vector<int> cond(4, 0);
  {
    ConstantField zero(Matrix(4, 2));
    CHECK(flow::euler_sample(zero, eps, cond, 10) == eps);
  }
  {
    const Matrix x0 = rng.normal_matrix(4, 2);
    Matrix velocity = eps;
    for (std::size_t i = 0; i < velocity.size(); ++i) velocity[i] -= x0[i];
    ConstantField oracle(velocity);
    for (std::size_t n : {1u, 2u, 7u, 28u, 100u}) {
      CHECK(faillab::max_abs_diff(flow::euler_sample(oracle, eps, cond, n), x0) < 1e-9);
    }
  }
  {
    const auto vf = small_field(2, 1, 6);
    const Matrix one_step = flow::euler_sample(flow::FrozenVectorField(vf), eps, cond, 1);
    const Matrix v = vf.velocity(eps, Matrix(4, 1, 1.0), cond);
    Matrix expected = eps;
    for (std::size_t i = 0; i < expected.size(); ++i) expected[i] -= v[i];
    CHECK(one_step == expected);
  }
  {
    const auto vf = small_field(2, 1, 6);
    flow::Trajectory traj;
    const Matrix out = flow::euler_sample(flow::FrozenVectorField(vf), eps, cond, 5, &traj);
    CHECK(traj.states.size() == 6);
    CHECK(traj.states.front() == eps);
    CHECK(traj.states.back() == out);
    Tape tape;
    const Var taped = flow::euler_sample(vf.bind(tape, true), tape, tape.constant(eps), cond, 5);
    CHECK(taped.value() == out);
  }
  CHECK_THROWS_AS(flow::euler_sample(ConstantField(Matrix(4, 2)), eps, cond, 0), ContractViolation);
}

TEST_CASE("euler_sample: non-finite state reports the step index") {
  Matrix huge(1, 1, 1e308);
  ConstantField blowup(huge);
  try {
    flow::euler_sample(blowup, Matrix::scalar(-1e308), std::vector<int>{0}, 4);
    FAIL("expected SamplingError");
  } catch (const flow::SamplingError& e) {
    CHECK(e.step() == 3);
  }
}

TEST_CASE("single_step_denoise: hand-evaluated cases") {
  const Matrix x0 = Matrix::scalar(0.0);
  const Matrix eps = Matrix::scalar(1.0);
  const Matrix t = Matrix::scalar(0.5);
  const std::vector<int> cond{0};
  {
    ConstantField exact(Matrix::scalar(1.0));
    Tape tape;
    CHECK(flow::single_step_denoise(exact, tape, x0, eps, t, 0.25, cond).value().item() == 0.0);
  }
  {
    ConstantField zero(Matrix::scalar(0.0));
    Tape tape;
    CHECK(flow::single_step_denoise(zero, tape, x0, eps, t, 0.25, cond).value().item() == -1.0);
  }
  {
    ConstantField exact(Matrix::scalar(1.0));
    Tape tape;
    CHECK(flow::single_step_denoise(exact, tape, x0, eps, Matrix::scalar(0.0), 0.6, cond)
              .value()
              .item() == doctest::Approx(0.0).epsilon(1e-15));
  }
}

TEST_CASE("single_step_denoise: rejects near-singular denominators") {
  ConstantField zero(Matrix::scalar(0.0));
  Tape tape;
  const std::vector<int> cond{0};
  const double dt = 0.25;
  CHECK_THROWS_AS(flow::single_step_denoise(zero, tape, Matrix::scalar(0.0), Matrix::scalar(1.0),
                                            Matrix::scalar(0.75), dt, cond),
                  ContractViolation);
  CHECK_THROWS_AS(flow::single_step_denoise(zero, tape, Matrix::scalar(0.0), Matrix::scalar(1.0),
                                            Matrix::scalar(0.7495), dt, cond),
                  ContractViolation);
  CHECK_NOTHROW(flow::single_step_denoise(zero, tape, Matrix::scalar(0.0), Matrix::scalar(1.0),
                                          Matrix::scalar(flow::max_denoise_time(dt)), dt, cond));
  CHECK_THROWS_AS(flow::single_step_denoise(zero, tape, Matrix::scalar(0.0), Matrix::scalar(1.0),
                                            Matrix::scalar(0.1), 0.0, cond),
                  ContractViolation);
}

TEST_CASE("single_step_denoise is exact under the conditional velocity on a 10x10 grid") {
  Rng rng(8);
  const Matrix x0 = rng.normal_matrix(3, 2);
  const Matrix eps = rng.normal_matrix(3, 2);
  Matrix velocity = eps;
  for (std::size_t i = 0; i < velocity.size(); ++i) velocity[i] -= x0[i];
  ConstantField exact(velocity);
  const std::vector<int> cond(3, 0);
  double worst = 0.0;
  for (int i = 0; i < 10; ++i) {
    const double dt = 0.005 + 0.5 * i / 9.0;
    for (int j = 0; j < 10; ++j) {
      const double t = flow::max_denoise_time(dt) * j / 9.0;
      Tape tape;
      const Var out = flow::single_step_denoise(exact, tape, x0, eps, Matrix(3, 1, t), dt, cond);
      worst = std::max(worst, faillab::max_abs_diff(out.value(), x0));
    }
  }
  CHECK(worst < 1e-9);
}

TEST_CASE("single_step_denoise: gradients pass grad_check") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto vf = small_field(2, 2, 100 + seed);
    Rng rng(200 + seed);
    const Matrix x0 = rng.normal_matrix(4, 2);
    const Matrix eps = rng.normal_matrix(4, 2);
    Matrix t(4, 1);
    for (double& v : t.values()) v = rng.uniform(0.0, flow::max_denoise_time(0.1));
    const std::vector<int> cond{0, 1, 1, 0};
    const Matrix weights = rng.normal_matrix(4, 2);
    const diff::Objective f = [&](Tape& tape, std::span<const Var> p) {
      const flow::BoundVectorField field(vf, {p.begin(), p.end()});
      const Var x = flow::single_step_denoise(field, tape, x0, eps, t, 0.1, cond);
      return diff::mean(diff::tanh(x * tape.constant(weights)));
    };
    const auto report = diff::grad_check(f, tensors_of(vf), 1e-5);
    INFO("seed " << seed << " worst " << report.max_rel_error);
    CHECK(report.passed(1e-6));
  }
}

TEST_CASE("vector field: taped and tape-free velocities agree bitwise") {
  const auto vf = small_field(3, 2, 9);
  Rng rng(10);
  const Matrix x = rng.normal_matrix(5, 3);
  Matrix t(5, 1);
  for (double& v : t.values()) v = rng.uniform();
  const std::vector<int> cond{1, 0, 1, 1, 0};
  Tape tape;
  CHECK(vf.bind(tape, true).on_tape(tape, tape.constant(x), t, cond).value() ==
        vf.velocity(x, t, cond));
  auto zeroed = vf;
  zeroed.zero_output();
  const Matrix zero_velocity = zeroed.velocity(x, t, cond);
  for (double v : zero_velocity.values()) CHECK(v == 0.0);
}
