// Copyright 2026 The fail-lab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "faillab/flow/vector_field.hpp"

namespace faillab::flow {

/// Margin kept between t + Δt and 1 in the single-step denoiser.
inline constexpr double kDenoiseMargin = 1e-3;
/// Default training step, matching a 28-step sampler.
inline constexpr double kDefaultDeltaT = 1.0 / 28.0;

/// Raised when the sampler state stops being finite.
class SamplingError : public NumericalError {
 public:
  SamplingError(const std::string& what, std::size_t step) : NumericalError(what), step_(step) {}
  std::size_t step() const { return step_; }

 private:
  std::size_t step_;
};

/// One realization of the interpolation path, batched by rows.
/// Invariant: x_t = (1 - t) x0 + t eps and 0 <= t <= 1.
struct FlowSample {
  Matrix x0;
  Matrix eps;
  Matrix t;  // B x 1
  Matrix x_t;
  std::vector<int> cond;

  static FlowSample make(Matrix x0, Matrix eps, Matrix t, std::vector<int> cond);
};

/// (1 - t) x0 + t eps with a per-row t (B x 1) or a single 1 x 1 t.
/// Draws t ~ U(0, 1) and eps ~ N(0, I) for every row of x0.
FlowSample draw_sample(Matrix x0, std::vector<int> cond, Rng& rng);

Matrix interpolate(const Matrix& x0, const Matrix& eps, const Matrix& t);
Matrix interpolate(const Matrix& x0, const Matrix& eps, double t);

/// Per-row ‖v(x_t, t, c) - (eps - x0)‖² / d, a B x 1 column on the tape.
Var cfm_loss_per_sample(const VelocityField& field, Tape& tape, const FlowSample& sample);
/// Batch mean of cfm_loss_per_sample.
Var cfm_loss(const VelocityField& field, Tape& tape, const FlowSample& sample);

struct Trajectory {
  std::vector<Matrix> states;  // states[k] is the state after k Euler steps
};

/// Integrates dx/dt = v from t = 1 (x = eps) down to t = 0 with n_steps uniform
/// Euler steps. Fills `trajectory` when non-null.
Matrix euler_sample(const VelocityField& field, const Matrix& eps, std::span<const int> cond,
                    std::size_t n_steps, Trajectory* trajectory = nullptr);

/// The same integration recorded on the tape.
Var euler_sample(const VelocityField& field, Tape& tape, Var eps, std::span<const int> cond,
                 std::size_t n_steps);

/// Clean-sample estimate from one Euler step taken at time t:
///   x0' = (x_t + Δt v(x_t, t, c) - (t + Δt) eps) / (1 - (t + Δt)),
/// with x_t = interpolate(x0, eps, t). Requires 0 <= t <= 1 - Δt - kDenoiseMargin.
Var single_step_denoise(const VelocityField& field, Tape& tape, const Matrix& x0,
                        const Matrix& eps, const Matrix& t, double delta_t,
                        std::span<const int> cond);

/// Upper bound for denoising times: 1 - Δt - kDenoiseMargin.
double max_denoise_time(double delta_t);

/// Euler step count matching a training step size, round(1 / Δt).
std::size_t steps_for_delta(double delta_t);

}  // namespace faillab::flow
