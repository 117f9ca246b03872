// Copyright 2026 The fail-lab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "faillab/adversary/discriminator.hpp"
#include "faillab/eval/targets.hpp"
#include "faillab/flow/vector_field.hpp"

namespace faillab::eval {

inline constexpr std::size_t kDefaultProjections = 128;
inline constexpr double kCollapseThreshold = 0.02;

/// n_proj unit directions in R^d, one per row, fixed by `seed`.
Matrix projection_directions(std::size_t dim, std::size_t n_proj, std::uint64_t seed);

/// Mean over projections of the 1-D 2-Wasserstein distance between the
/// projected point sets. Sets must have equal size.
double sliced_wasserstein(const Matrix& a, const Matrix& b, std::size_t n_proj,
                          std::uint64_t seed);
double sliced_wasserstein(const Matrix& a, const Matrix& b, const Matrix& directions);

/// 2·E‖a − b‖ − E‖a − a'‖ − E‖b − b'‖ over all pairs (self pairs included).
double energy_distance(const Matrix& a, const Matrix& b);

struct Coverage {
  std::vector<double> fractions;  // per mode
  bool collapsed = false;
};

/// Each sample counts toward the nearest mode whose ball contains it.
/// Collapse: some mode with positive weight holds less than `threshold`.
Coverage mode_coverage(const Matrix& samples, std::span<const Mode> modes,
                       double threshold = kCollapseThreshold);

/// Accuracy of thresholding σ(D) at 0.5 on expert vs policy points; ties
/// count as expert.
double disc_probe_accuracy(const adversary::Discriminator& d, const Matrix& expert,
                           std::span<const int> expert_cond, const Matrix& policy,
                           std::span<const int> policy_cond);

struct MetricReport {
  double sliced_wasserstein = 0.0;
  double energy_distance = 0.0;
  std::vector<double> mode_coverage;
  bool collapsed = false;
  double disc_probe_accuracy = 0.0;
  std::size_t sample_count = 0;
  std::uint64_t seed = 0;
};

struct EvalOptions {
  std::size_t samples = 1000;
  std::size_t projections = kDefaultProjections;
  std::size_t sampler_steps = 28;
  std::uint64_t seed = 0;
};

/// Draws `samples` policy and expert points (classes assigned round-robin)
/// and compares them. Every random draw comes from streams of `seed`.
MetricReport evaluate(const flow::VectorField& policy, const adversary::Discriminator* disc,
                      const TargetSpec& target, const EvalOptions& options);

}  // namespace faillab::eval
