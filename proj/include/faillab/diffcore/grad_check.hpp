// Copyright 2026 The fail-lab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "faillab/diffcore/matrix.hpp"
#include "faillab/diffcore/tape.hpp"

namespace faillab::diff {

/// Builds a scalar loss on `tape` from parameters already bound on it.
using Objective = std::function<Var(Tape& tape, std::span<const Var> params)>;

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::size_t worst_tensor = 0;
  std::size_t worst_entry = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  std::size_t entries_checked = 0;
  /// False when the objective was non-finite at some perturbed point.
  bool finite = true;
  std::string failure;

  bool passed(double tolerance) const { return finite && max_rel_error < tolerance; }
};

/// Compares reverse-mode gradients against central differences with step h.
/// Each parameter tensor scores ‖a − n‖ / (‖a‖ + ‖n‖ + 1e-12) over its
/// entries; the report holds the maximum over tensors and the entry with the
/// largest absolute discrepancy inside the worst tensor.
GradCheckReport grad_check(const Objective& f, std::span<const Matrix> params, double h = 1e-5);

/// Value of the objective at `params` (forward only).
double evaluate(const Objective& f, std::span<const Matrix> params);

/// Reverse-mode gradient of the objective at `params`.
std::vector<Matrix> gradient(const Objective& f, std::span<const Matrix> params);

}  // namespace faillab::diff
