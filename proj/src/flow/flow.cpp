// Copyright 2026 The fail-lab Authors
// SPDX-License-Identifier: Apache-2.0

#include "faillab/flow/flow.hpp"

#include <cmath>

namespace faillab::flow {
namespace {

void check_time(double t) {
  if (!(t >= 0.0 && t <= 1.0)) {
    throw ContractViolation("interpolation time " + std::to_string(t) + " outside [0, 1]");
  }
}

}  // namespace

FlowSample draw_sample(Matrix x0, std::vector<int> cond, Rng& rng) {
  Matrix t(x0.rows(), 1);
  for (double& v : t.values()) v = rng.uniform();
  Matrix eps = rng.normal_matrix(x0.rows(), x0.cols());
  return FlowSample::make(std::move(x0), std::move(eps), std::move(t), std::move(cond));
}

Matrix interpolate(const Matrix& x0, const Matrix& eps, const Matrix& t) {
  if (!x0.same_shape(eps)) {
    throw ContractViolation("interpolate: x0 " + x0.shape_string() + " vs eps " +
                            eps.shape_string());
  }
  const bool shared = t.rows() == 1 && t.cols() == 1;
  if (!shared && (t.cols() != 1 || t.rows() != x0.rows())) {
    throw ContractViolation("interpolate: t must be 1x1 or one entry per row");
  }
  for (double v : t.values()) check_time(v);
  Matrix out(x0.rows(), x0.cols());
  for (std::size_t r = 0; r < x0.rows(); ++r) {
    const double tr = shared ? t[0] : t[r];
    for (std::size_t c = 0; c < x0.cols(); ++c) {
      out(r, c) = (1.0 - tr) * x0(r, c) + tr * eps(r, c);
    }
  }
  return out;
}

Matrix interpolate(const Matrix& x0, const Matrix& eps, double t) {
  return interpolate(x0, eps, Matrix::scalar(t));
}

FlowSample FlowSample::make(Matrix x0, Matrix eps, Matrix t, std::vector<int> cond) {
  FlowSample s;
  s.x_t = interpolate(x0, eps, t);
  if (t.rows() != x0.rows() || cond.size() != x0.rows()) {
    throw ContractViolation("flow sample needs one time and one class per row");
  }
  s.x0 = std::move(x0);
  s.eps = std::move(eps);
  s.t = std::move(t);
  s.cond = std::move(cond);
  return s;
}

Var cfm_loss_per_sample(const VelocityField& field, Tape& tape, const FlowSample& sample) {
  Matrix target = sample.eps;
  for (std::size_t i = 0; i < target.size(); ++i) target[i] -= sample.x0[i];
  const Var v = field.on_tape(tape, tape.constant(sample.x_t), sample.t, sample.cond);
  return diff::row_mean(diff::square(v - tape.constant(std::move(target))));
}

Var cfm_loss(const VelocityField& field, Tape& tape, const FlowSample& sample) {
  return diff::mean(cfm_loss_per_sample(field, tape, sample));
}

Matrix euler_sample(const VelocityField& field, const Matrix& eps, std::span<const int> cond,
                    std::size_t n_steps, Trajectory* trajectory) {
  if (n_steps < 1) throw ContractViolation("euler_sample needs n_steps >= 1");
  const double dt = 1.0 / static_cast<double>(n_steps);
  Matrix x = eps;
  if (trajectory != nullptr) trajectory->states = {x};
  Matrix t(x.rows(), 1);
  for (std::size_t k = 0; k < n_steps; ++k) {
    const double now = 1.0 - static_cast<double>(k) * dt;
    for (double& v : t.values()) v = now;
    const Matrix v = field.eval(x, t, cond);
    for (std::size_t i = 0; i < x.size(); ++i) x[i] -= dt * v[i];
    if (!x.all_finite()) {
      throw SamplingError("non-finite sampler state at Euler step " + std::to_string(k), k);
    }
    if (trajectory != nullptr) trajectory->states.push_back(x);
  }
  return x;
}

Var euler_sample(const VelocityField& field, Tape& tape, Var eps, std::span<const int> cond,
                 std::size_t n_steps) {
  if (n_steps < 1) throw ContractViolation("euler_sample needs n_steps >= 1");
  const double dt = 1.0 / static_cast<double>(n_steps);
  Var x = eps;
  Matrix t(eps.rows(), 1);
  for (std::size_t k = 0; k < n_steps; ++k) {
    const double now = 1.0 - static_cast<double>(k) * dt;
    for (double& v : t.values()) v = now;
    x = x - diff::scale(field.on_tape(tape, x, t, cond), dt);
    if (!x.value().all_finite()) {
      throw SamplingError("non-finite sampler state at Euler step " + std::to_string(k), k);
    }
  }
  return x;
}

double max_denoise_time(double delta_t) { return 1.0 - delta_t - kDenoiseMargin; }

std::size_t steps_for_delta(double delta_t) {
  if (!(delta_t > 0.0 && delta_t <= 1.0)) {
    throw ConfigurationError("delta_t must lie in (0, 1]");
  }
  return static_cast<std::size_t>(std::lround(1.0 / delta_t));
}

Var single_step_denoise(const VelocityField& field, Tape& tape, const Matrix& x0,
                        const Matrix& eps, const Matrix& t, double delta_t,
                        std::span<const int> cond) {
  if (!(delta_t > 0.0)) throw ContractViolation("single_step_denoise needs delta_t > 0");
  if (t.cols() != 1 || t.rows() != x0.rows()) {
    throw ContractViolation("single_step_denoise needs one time per row");
  }
  const double t_max = max_denoise_time(delta_t);
  for (double v : t.values()) {
    if (v > t_max) {
      throw ContractViolation("single_step_denoise: t + delta_t = " + std::to_string(v + delta_t) +
                              " leaves a near-singular denominator 1 - (t + delta_t)");
    }
  }
  const Matrix x_t = interpolate(x0, eps, t);
  const Var v = field.on_tape(tape, tape.constant(x_t), t, cond);

  // (x_t - (t + Δt) eps) / (1 - (t + Δt)) + Δt / (1 - (t + Δt)) * v
  Matrix offset(x0.rows(), x0.cols());
  Matrix gain(x0.rows(), 1);
  for (std::size_t r = 0; r < x0.rows(); ++r) {
    const double s = t[r] + delta_t;
    const double denom = 1.0 - s;
    gain[r] = delta_t / denom;
    for (std::size_t c = 0; c < x0.cols(); ++c) {
      offset(r, c) = (x_t(r, c) - s * eps(r, c)) / denom;
    }
  }
  return tape.constant(std::move(offset)) + v * tape.constant(std::move(gain));
}

}  // namespace faillab::flow
