// Copyright 2026 The fail-lab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <vector>

namespace faillab::harness {

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

struct CheckOptions {
  int instances = 20;             // random instances per gradient family
  double grad_tolerance = 1e-6;   // grad_check relative error
  double exactness_tolerance = 1e-9;
};

/// grad_check of every differentiable loss on random small instances: CFM,
/// disc_loss (all variants), the pathwise generator loss, the combined
/// pathwise loss, the FPO surrogate, the KL estimate, the combined PG loss
/// and the DPO loss. One result per family.
std::vector<CheckResult> gradient_checks(const CheckOptions& options = {});

/// Exactness of the single-step denoiser and of Euler sampling under the
/// conditional velocity.
std::vector<CheckResult> exactness_checks(const CheckOptions& options = {});

/// Closed-form identities: FPO ratio at θ_old, KL at θ_ref, GRPO
/// normalisation and the clipped-surrogate contract.
std::vector<CheckResult> identity_checks();

/// Spectral-norm bound and checkpoint round-trip.
std::vector<CheckResult> persistence_checks();

/// All of the above.
std::vector<CheckResult> run_check_suite(const CheckOptions& options = {});

}  // namespace faillab::harness
