// Copyright 2026 The fail-lab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "faillab/diffcore/matrix.hpp"
#include "faillab/diffcore/rng.hpp"

namespace faillab::eval {

enum class TargetKind { kGaussianMixture, kCheckerboard, kTwoMoons };

std::string_view target_kind_name(TargetKind k);
TargetKind parse_target_kind(std::string_view name);

/// Isotropic Gaussian component N(mean, std² I).
struct Component {
  int cond = 0;
  double weight = 1.0;
  std::vector<double> mean;
  double std = 1.0;

  friend bool operator==(const Component&, const Component&) = default;
};

/// Smallest coverage radius; keeps zero-width components countable.
inline constexpr double kMinModeRadius = 0.1;

/// A ball used for coverage counting.
struct Mode {
  std::vector<double> center;
  double radius = 1.0;
  double weight = 1.0;
};

/// Expert distribution p_E(x | c). Mixture weights are normalised per class.
/// checkerboard and two_moons are 2-D and ignore the class label.
struct TargetSpec {
  TargetKind kind = TargetKind::kGaussianMixture;
  std::size_t dim = 2;
  std::size_t classes = 1;
  std::vector<Component> components;  // gaussian_mixture
  int cells = 4;                      // checkerboard: cells per side
  double scale = 1.0;                 // checkerboard side / 2, two_moons radius
  double noise = 0.05;                // two_moons: relative radial jitter, uniform

  void validate() const;
  /// Components of class `cond` with weights summing to 1.
  std::vector<Component> components_for(int cond) const;
  /// Coverage balls for `cond`: radius 3σ for mixture components.
  std::vector<Mode> modes(int cond) const;

  friend bool operator==(const TargetSpec&, const TargetSpec&) = default;
};

/// n i.i.d. draws for class `cond`.
Matrix sample_expert(const TargetSpec& target, std::size_t n, int cond, Rng& rng);
Matrix sample_expert(const TargetSpec& target, std::size_t n, int cond, std::uint64_t seed);

/// One draw per label.
Matrix sample_expert(const TargetSpec& target, std::span<const int> cond, Rng& rng);

}  // namespace faillab::eval
