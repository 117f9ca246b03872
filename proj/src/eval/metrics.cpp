// Copyright 2026 The fail-lab Authors
// SPDX-License-Identifier: Apache-2.0

#include "faillab/eval/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "faillab/adversary/losses.hpp"
#include "faillab/flow/flow.hpp"

namespace faillab::eval {

Matrix projection_directions(std::size_t dim, std::size_t n_proj, std::uint64_t seed) {
  if (n_proj == 0) throw ContractViolation("sliced_wasserstein needs n_proj >= 1");
  Rng rng(seed, "projections");
  Matrix dirs(n_proj, dim);
  for (std::size_t p = 0; p < n_proj; ++p) {
    double norm = 0.0;
    while (norm < 1e-12) {
      norm = 0.0;
      for (std::size_t c = 0; c < dim; ++c) {
        dirs(p, c) = rng.normal();
        norm += dirs(p, c) * dirs(p, c);
      }
      norm = std::sqrt(norm);
    }
    for (std::size_t c = 0; c < dim; ++c) dirs(p, c) /= norm;
  }
  return dirs;
}

double sliced_wasserstein(const Matrix& a, const Matrix& b, const Matrix& directions) {
  if (a.rows() != b.rows()) {
    throw ContractViolation("sliced_wasserstein needs equal-size sets (" +
                            std::to_string(a.rows()) + " vs " + std::to_string(b.rows()) + ")");
  }
  if (a.cols() != b.cols() || a.cols() != directions.cols()) {
    throw ContractViolation("sliced_wasserstein dimension mismatch");
  }
  if (a.rows() == 0) throw ContractViolation("sliced_wasserstein needs non-empty sets");
  const std::size_t n = a.rows();
  std::vector<double> pa(n);
  std::vector<double> pb(n);
  double total = 0.0;
  for (std::size_t p = 0; p < directions.rows(); ++p) {
    for (std::size_t i = 0; i < n; ++i) {
      double sa = 0.0;
      double sb = 0.0;
      for (std::size_t c = 0; c < a.cols(); ++c) {
        sa += a(i, c) * directions(p, c);
        sb += b(i, c) * directions(p, c);
      }
      pa[i] = sa;
      pb[i] = sb;
    }
    std::sort(pa.begin(), pa.end());
    std::sort(pb.begin(), pb.end());
    double sq = 0.0;
    for (std::size_t i = 0; i < n; ++i) sq += (pa[i] - pb[i]) * (pa[i] - pb[i]);
    total += std::sqrt(sq / static_cast<double>(n));
  }
  return total / static_cast<double>(directions.rows());
}

double sliced_wasserstein(const Matrix& a, const Matrix& b, std::size_t n_proj,
                          std::uint64_t seed) {
  return sliced_wasserstein(a, b, projection_directions(a.cols(), n_proj, seed));
}

namespace {

double mean_pair_distance(const Matrix& a, const Matrix& b) {
  double total = 0.0;
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = 0; j < b.rows(); ++j) {
      double sq = 0.0;
      for (std::size_t c = 0; c < a.cols(); ++c) {
        const double d = a(i, c) - b(j, c);
        sq += d * d;
      }
      total += std::sqrt(sq);
    }
  }
  return total / (static_cast<double>(a.rows()) * static_cast<double>(b.rows()));
}

}  // namespace

double energy_distance(const Matrix& a, const Matrix& b) {
  if (a.rows() == 0 || b.rows() == 0) throw ContractViolation("energy_distance needs samples");
  if (a.cols() != b.cols()) throw ContractViolation("energy_distance dimension mismatch");
  const double value = 2.0 * mean_pair_distance(a, b) - mean_pair_distance(a, a) -
                       mean_pair_distance(b, b);
  // The V-statistic is non-negative; clear rounding residue on equal sets.
  return std::max(value, 0.0);
}

Coverage mode_coverage(const Matrix& samples, std::span<const Mode> modes, double threshold) {
  if (samples.rows() == 0) throw ContractViolation("mode_coverage needs samples");
  for (const auto& m : modes) {
    if (!(m.radius > 0.0)) throw ContractViolation("mode radius must be > 0");
    if (m.center.size() != samples.cols()) throw ContractViolation("mode dimension mismatch");
  }
  Coverage out;
  out.fractions.assign(modes.size(), 0.0);
  for (std::size_t i = 0; i < samples.rows(); ++i) {
    double best = std::numeric_limits<double>::infinity();
    std::size_t best_k = modes.size();
    for (std::size_t k = 0; k < modes.size(); ++k) {
      double sq = 0.0;
      for (std::size_t c = 0; c < samples.cols(); ++c) {
        const double d = samples(i, c) - modes[k].center[c];
        sq += d * d;
      }
      const double dist = std::sqrt(sq);
      if (dist <= modes[k].radius && dist < best) {
        best = dist;
        best_k = k;
      }
    }
    if (best_k < modes.size()) out.fractions[best_k] += 1.0;
  }
  for (std::size_t k = 0; k < modes.size(); ++k) {
    out.fractions[k] /= static_cast<double>(samples.rows());
    if (modes[k].weight > 0.0 && out.fractions[k] < threshold) out.collapsed = true;
  }
  return out;
}

double disc_probe_accuracy(const adversary::Discriminator& d, const Matrix& expert,
                           std::span<const int> expert_cond, const Matrix& policy,
                           std::span<const int> policy_cond) {
  return adversary::probe_accuracy(d.logit(expert, expert_cond), d.logit(policy, policy_cond));
}

MetricReport evaluate(const flow::VectorField& policy, const adversary::Discriminator* disc,
                      const TargetSpec& target, const EvalOptions& options) {
  if (options.samples == 0) throw ContractViolation("evaluation needs samples >= 1");
  std::vector<int> cond(options.samples);
  for (std::size_t i = 0; i < cond.size(); ++i) cond[i] = static_cast<int>(i % target.classes);

  Rng noise(options.seed, "eval_noise");
  const Matrix eps = noise.normal_matrix(options.samples, target.dim);
  const Matrix generated =
      flow::euler_sample(flow::FrozenVectorField(policy), eps, cond, options.sampler_steps);
  Rng expert_rng(options.seed, "eval_expert");
  const Matrix expert = sample_expert(target, cond, expert_rng);

  MetricReport report;
  report.sample_count = options.samples;
  report.seed = options.seed;
  report.sliced_wasserstein =
      sliced_wasserstein(generated, expert, options.projections, options.seed);
  report.energy_distance = energy_distance(generated, expert);
  std::vector<Mode> modes;
  for (std::size_t c = 0; c < target.classes; ++c) {
    for (auto m : target.modes(static_cast<int>(c))) {
      m.weight /= static_cast<double>(target.classes);
      modes.push_back(std::move(m));
    }
  }
  const auto coverage = mode_coverage(generated, modes);
  report.mode_coverage = coverage.fractions;
  report.collapsed = coverage.collapsed;
  if (disc != nullptr) {
    report.disc_probe_accuracy = disc_probe_accuracy(*disc, expert, cond, generated, cond);
  }
  return report;
}

}  // namespace faillab::eval
