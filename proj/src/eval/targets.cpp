// Copyright 2026 The fail-lab Authors
// SPDX-License-Identifier: Apache-2.0

#include "faillab/eval/targets.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

namespace faillab::eval {

std::string_view target_kind_name(TargetKind k) {
  switch (k) {
    case TargetKind::kGaussianMixture: return "gaussian_mixture";
    case TargetKind::kCheckerboard: return "checkerboard";
    case TargetKind::kTwoMoons: return "two_moons";
  }
  return "gaussian_mixture";
}

TargetKind parse_target_kind(std::string_view name) {
  if (name == "gaussian_mixture") return TargetKind::kGaussianMixture;
  if (name == "checkerboard") return TargetKind::kCheckerboard;
  if (name == "two_moons") return TargetKind::kTwoMoons;
  throw ConfigurationError("unknown target kind '" + std::string(name) + "'");
}

void TargetSpec::validate() const {
  if (dim == 0) throw ConfigurationError("target dim must be >= 1");
  if (classes == 0) throw ConfigurationError("target classes must be >= 1");
  switch (kind) {
    case TargetKind::kGaussianMixture:
      for (std::size_t c = 0; c < classes; ++c) {
        double total = 0.0;
        for (const auto& comp : components) {
          if (comp.cond < 0 || static_cast<std::size_t>(comp.cond) >= classes) {
            throw ConfigurationError("component class " + std::to_string(comp.cond) +
                                     " outside [0, classes)");
          }
          if (comp.cond != static_cast<int>(c)) continue;
          if (comp.mean.size() != dim) {
            throw ConfigurationError("component mean has " + std::to_string(comp.mean.size()) +
                                     " entries for dimension " + std::to_string(dim));
          }
          if (!(comp.std >= 0.0)) throw ConfigurationError("component std must be >= 0");
          if (!(comp.weight > 0.0)) throw ConfigurationError("component weight must be > 0");
          total += comp.weight;
        }
        if (total == 0.0) {
          throw ConfigurationError("class " + std::to_string(c) + " has no mixture component");
        }
      }
      break;
    case TargetKind::kCheckerboard:
    case TargetKind::kTwoMoons:
      if (dim != 2) throw ConfigurationError(std::string(target_kind_name(kind)) + " is 2-D");
      if (!(scale > 0.0)) throw ConfigurationError("target scale must be > 0");
      if (kind == TargetKind::kCheckerboard && cells < 2) {
        throw ConfigurationError("checkerboard needs cells >= 2");
      }
      if (!(noise >= 0.0)) throw ConfigurationError("target noise must be >= 0");
      break;
  }
}

std::vector<Component> TargetSpec::components_for(int cond) const {
  if (cond < 0 || static_cast<std::size_t>(cond) >= classes) {
    throw ContractViolation("unknown class " + std::to_string(cond));
  }
  std::vector<Component> out;
  double total = 0.0;
  for (const auto& c : components) {
    if (c.cond == cond) {
      out.push_back(c);
      total += c.weight;
    }
  }
  for (auto& c : out) c.weight /= total;
  return out;
}

std::vector<Mode> TargetSpec::modes(int cond) const {
  std::vector<Mode> out;
  switch (kind) {
    case TargetKind::kGaussianMixture:
      for (const auto& c : components_for(cond)) out.push_back({c.mean, std::max(3.0 * c.std, kMinModeRadius), c.weight});
      break;
    case TargetKind::kCheckerboard: {
      const double side = 2.0 * scale / cells;
      const std::size_t filled = static_cast<std::size_t>(cells * cells / 2);
      for (int i = 0; i < cells; ++i) {
        for (int j = 0; j < cells; ++j) {
          if ((i + j) % 2 != 0) continue;
          out.push_back({{-scale + (i + 0.5) * side, -scale + (j + 0.5) * side}, side / 2.0,
                         1.0 / static_cast<double>(filled)});
        }
      }
      break;
    }
    case TargetKind::kTwoMoons:
      out.push_back({{0.0, scale}, 0.75 * scale, 0.5});
      out.push_back({{scale, 0.5 * scale - scale}, 0.75 * scale, 0.5});
      break;
  }
  return out;
}

Matrix sample_expert(const TargetSpec& target, std::size_t n, int cond, Rng& rng) {
  if (n == 0) throw ContractViolation("sample_expert needs n >= 1");
  const std::vector<int> labels(n, cond);
  return sample_expert(target, labels, rng);
}

Matrix sample_expert(const TargetSpec& target, std::size_t n, int cond, std::uint64_t seed) {
  Rng rng(seed);
  return sample_expert(target, n, cond, rng);
}

Matrix sample_expert(const TargetSpec& target, std::span<const int> cond, Rng& rng) {
  Matrix out(cond.size(), target.dim);
  for (std::size_t i = 0; i < cond.size(); ++i) {
    if (cond[i] < 0 || static_cast<std::size_t>(cond[i]) >= target.classes) {
      throw ContractViolation("unknown class " + std::to_string(cond[i]));
    }
    switch (target.kind) {
      case TargetKind::kGaussianMixture: {
        const auto comps = target.components_for(cond[i]);
        double u = rng.uniform();
        std::size_t k = 0;
        while (k + 1 < comps.size() && u >= comps[k].weight) u -= comps[k++].weight;
        for (std::size_t c = 0; c < target.dim; ++c) {
          out(i, c) = comps[k].mean[c] + comps[k].std * rng.normal();
        }
        break;
      }
      case TargetKind::kCheckerboard: {
        const std::size_t cells = static_cast<std::size_t>(target.cells);
        const double side = 2.0 * target.scale / static_cast<double>(cells);
        std::size_t a;
        std::size_t b;
        do {
          a = rng.below(cells);
          b = rng.below(cells);
        } while ((a + b) % 2 != 0);
        out(i, 0) = -target.scale + (static_cast<double>(a) + rng.uniform()) * side;
        out(i, 1) = -target.scale + (static_cast<double>(b) + rng.uniform()) * side;
        break;
      }
      case TargetKind::kTwoMoons: {
        const double angle = std::numbers::pi * rng.uniform();
        const double radius = target.scale * (1.0 + target.noise * rng.uniform(-1.0, 1.0));
        if (rng.uniform() < 0.5) {
          out(i, 0) = radius * std::cos(angle);
          out(i, 1) = radius * std::sin(angle);
        } else {
          out(i, 0) = target.scale - radius * std::cos(angle);
          out(i, 1) = 0.5 * target.scale - radius * std::sin(angle);
        }
        break;
      }
    }
  }
  return out;
}

}  // namespace faillab::eval
