// Copyright 2026 The fail-lab Authors
// SPDX-License-Identifier: Apache-2.0

#include "faillab/diffcore/optim.hpp"

#include <cmath>

namespace faillab::diff {

AdamState AdamState::zeros_like(std::span<const Matrix* const> params, AdamHyper hyper) {
  AdamState s;
  s.hyper = hyper;
  for (const Matrix* p : params) {
    s.m.emplace_back(p->rows(), p->cols());
    s.v.emplace_back(p->rows(), p->cols());
  }
  return s;
}

void adamw_step(std::span<Matrix* const> params, std::span<const Matrix> grads, AdamState& state) {
  if (params.size() != grads.size() || params.size() != state.m.size() ||
      params.size() != state.v.size()) {
    throw ConfigurationError("adamw_step: " + std::to_string(params.size()) + " params, " +
                             std::to_string(grads.size()) + " grads, " +
                             std::to_string(state.m.size()) + " moment slots");
  }
  if (state.step < 0) throw ContractViolation("adamw_step: negative step count");
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!params[i]->same_shape(grads[i]) || !params[i]->same_shape(state.m[i]) ||
        !params[i]->same_shape(state.v[i])) {
      throw ConfigurationError("adamw_step: shape mismatch for parameter " + std::to_string(i));
    }
    if (!grads[i].all_finite()) {
      throw NumericalError("adamw_step: non-finite gradient for parameter " + std::to_string(i));
    }
  }

  const AdamHyper& h = state.hyper;
  state.step += 1;
  const double t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(h.beta1, t);
  const double correction2 = 1.0 - std::pow(h.beta2, t);

  for (std::size_t i = 0; i < params.size(); ++i) {
    Matrix& p = *params[i];
    Matrix& m = state.m[i];
    Matrix& v = state.v[i];
    const Matrix& g = grads[i];
    for (std::size_t j = 0; j < p.size(); ++j) {
      if (h.weight_decay != 0.0) p[j] -= h.lr * h.weight_decay * p[j];
      m[j] = h.beta1 * m[j] + (1.0 - h.beta1) * g[j];
      v[j] = h.beta2 * v[j] + (1.0 - h.beta2) * g[j] * g[j];
      const double m_hat = m[j] / correction1;
      const double v_hat = v[j] / correction2;
      p[j] -= h.lr * m_hat / (std::sqrt(v_hat) + h.eps);
    }
  }
}

ClipResult clip_global_norm(std::span<Matrix> grads, double max_norm) {
  if (!(max_norm > 0.0)) throw ContractViolation("clip_global_norm: max_norm must be > 0");
  ClipResult r;
  r.pre_clip_norm = global_norm(grads);
  if (!std::isfinite(r.pre_clip_norm)) {
    throw NumericalError("clip_global_norm: non-finite gradient norm");
  }
  if (r.pre_clip_norm > max_norm) {
    const double factor = max_norm / r.pre_clip_norm;
    for (Matrix& g : grads) {
      for (double& v : g.values()) v *= factor;
    }
    r.clipped = true;
  }
  return r;
}

}  // namespace faillab::diff
