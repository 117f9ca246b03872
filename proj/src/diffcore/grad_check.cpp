// Copyright 2026 The fail-lab Authors
// SPDX-License-Identifier: Apache-2.0

#include "faillab/diffcore/grad_check.hpp"

#include <cmath>

namespace faillab::diff {
namespace {

std::vector<Var> bind_all(Tape& tape, std::span<const Matrix> params) {
  std::vector<Var> vars;
  vars.reserve(params.size());
  for (const Matrix& p : params) vars.push_back(tape.param(p));
  return vars;
}

}  // namespace

double evaluate(const Objective& f, std::span<const Matrix> params) {
  Tape tape;
  const auto vars = bind_all(tape, params);
  return f(tape, vars).value().item();
}

std::vector<Matrix> gradient(const Objective& f, std::span<const Matrix> params) {
  Tape tape;
  const auto vars = bind_all(tape, params);
  const Var loss = f(tape, vars);
  tape.backward(loss);
  return tape.gradients(vars);
}

GradCheckReport grad_check(const Objective& f, std::span<const Matrix> params, double h) {
  if (!(h > 0.0)) throw ContractViolation("grad_check: step h must be positive");
  GradCheckReport report;
  const std::vector<Matrix> analytic = gradient(f, params);
  std::vector<Matrix> work(params.begin(), params.end());

  for (std::size_t t = 0; t < work.size(); ++t) {
    double diff_sq = 0.0;
    double analytic_sq = 0.0;
    double numeric_sq = 0.0;
    double worst_abs = -1.0;
    std::size_t worst_j = 0;
    double worst_a = 0.0;
    double worst_n = 0.0;
    for (std::size_t j = 0; j < work[t].size(); ++j) {
      const double original = work[t][j];
      work[t][j] = original + h;
      const double plus = evaluate(f, work);
      work[t][j] = original - h;
      const double minus = evaluate(f, work);
      work[t][j] = original;

      if (!std::isfinite(plus) || !std::isfinite(minus)) {
        report.finite = false;
        report.failure = "non-finite objective when perturbing tensor " + std::to_string(t) +
                         " entry " + std::to_string(j);
        report.worst_tensor = t;
        report.worst_entry = j;
        return report;
      }
      const double numeric = (plus - minus) / (2.0 * h);
      const double a = analytic[t][j];
      diff_sq += (a - numeric) * (a - numeric);
      analytic_sq += a * a;
      numeric_sq += numeric * numeric;
      if (std::abs(a - numeric) > worst_abs) {
        worst_abs = std::abs(a - numeric);
        worst_j = j;
        worst_a = a;
        worst_n = numeric;
      }
      ++report.entries_checked;
    }
    const double err =
        std::sqrt(diff_sq) / (std::sqrt(analytic_sq) + std::sqrt(numeric_sq) + 1e-12);
    if (err > report.max_rel_error) {
      report.max_rel_error = err;
      report.worst_tensor = t;
      report.worst_entry = worst_j;
      report.worst_analytic = worst_a;
      report.worst_numeric = worst_n;
    }
  }
  return report;
}

}  // namespace faillab::diff
