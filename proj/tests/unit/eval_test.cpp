// Copyright 2026 The fail-lab Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <vector>

#include "doctest.h"
#include "faillab/eval/metrics.hpp"
#include "test_states.hpp"

using faillab::ContractViolation;
using faillab::Matrix;
using faillab::Rng;
namespace ev = faillab::eval;
namespace adv = faillab::adversary;

namespace {

ev::TargetSpec one_gaussian(std::vector<double> mean, double std) {
  ev::TargetSpec t;
  t.dim = mean.size();
  t.components.push_back({0, 1.0, std::move(mean), std});
  return t;
}

ev::TargetSpec two_modes() {
  ev::TargetSpec t;
  t.components.push_back({0, 1.0, {-3.0, 0.0}, 0.5});
  t.components.push_back({0, 1.0, {3.0, 0.0}, 0.5});
  return t;
}

Matrix gaussian_points(std::size_t n, std::vector<double> mean, std::uint64_t seed) {
  return ev::sample_expert(one_gaussian(std::move(mean), 1.0), n, 0, seed);
}

}  // namespace

TEST_CASE("sample_expert: law of large numbers, determinism, class checks") {
  const auto target = one_gaussian({1.5, -2.0, 0.25}, 0.7);
  const std::size_t n = 20000;
  const Matrix x = ev::sample_expert(target, n, 0, std::uint64_t{1});
  for (std::size_t c = 0; c < 3; ++c) {
    double mean = 0.0;
    for (std::size_t i = 0; i < n; ++i) mean += x(i, c);
    mean /= n;
    CHECK(std::abs(mean - target.components[0].mean[c]) < 4.0 * 0.7 / std::sqrt(double(n)));
  }
  CHECK(ev::sample_expert(target, 50, 0, std::uint64_t{9}) ==
        ev::sample_expert(target, 50, 0, std::uint64_t{9}));
  CHECK_THROWS_AS(ev::sample_expert(target, 5, 1, std::uint64_t{1}), ContractViolation);
  CHECK_THROWS_AS(ev::sample_expert(target, 0, 0, std::uint64_t{1}), ContractViolation);

  auto bad = target;
  bad.components[0].mean.pop_back();
  CHECK_THROWS_AS(bad.validate(), faillab::ConfigurationError);
  CHECK_NOTHROW(target.validate());
}

TEST_CASE("sample_expert: mixture weights and geometric targets") {
  auto t = two_modes();
  t.components[1].weight = 3.0;
  const Matrix x = ev::sample_expert(t, 20000, 0, std::uint64_t{2});
  double right = 0.0;
  for (std::size_t i = 0; i < x.rows(); ++i) right += x(i, 0) > 0 ? 1.0 : 0.0;
  CHECK(right / x.rows() == doctest::Approx(0.75).epsilon(0.03));

  ev::TargetSpec moons;
  moons.kind = ev::TargetKind::kTwoMoons;
  moons.scale = 1.0;
  moons.noise = 0.1;
  const Matrix m = ev::sample_expert(moons, 5000, 0, std::uint64_t{3});
  // Upper arc spans x ∈ [−r, r], y ∈ [0, r]; lower arc x ∈ [s − r, s + r],
  // y ∈ [s/2 − r, s/2], with r ≤ s(1 + noise).
  const double r = 1.1;
  for (std::size_t i = 0; i < m.rows(); ++i) {
    CHECK(m(i, 0) >= -r);
    CHECK(m(i, 0) <= 1.0 + r);
    CHECK(m(i, 1) >= 0.5 - r);
    CHECK(m(i, 1) <= r);
  }

  ev::TargetSpec board;
  board.kind = ev::TargetKind::kCheckerboard;
  board.cells = 4;
  board.scale = 2.0;
  const Matrix b = ev::sample_expert(board, 3000, 0, std::uint64_t{4});
  for (std::size_t i = 0; i < b.rows(); ++i) {
    const int a = static_cast<int>(std::floor(b(i, 0) + 2.0));
    const int c = static_cast<int>(std::floor(b(i, 1) + 2.0));
    CHECK((a + c) % 2 == 0);
    CHECK(std::abs(b(i, 0)) <= 2.0);
  }
}

TEST_CASE("sliced_wasserstein: identity, point masses, Gaussian shift oracle") {
  const Matrix a = gaussian_points(100, {0.0, 0.0}, 5);
  CHECK(ev::sliced_wasserstein(a, a, 16, 1) == 0.0);
  CHECK(ev::sliced_wasserstein(Matrix::scalar(0.0), Matrix::scalar(1.0), 4, 1) ==
        doctest::Approx(1.0).epsilon(1e-15));
  CHECK_THROWS_AS(ev::sliced_wasserstein(a, gaussian_points(99, {0.0, 0.0}, 6), 4, 1),
                  ContractViolation);
  CHECK_THROWS_AS(ev::sliced_wasserstein(a, a, 0, 1), ContractViolation);

  // Projections of N(0, I) and N(μ, I) onto θ are N(0, 1) and N(θ·μ, 1),
  // whose W2 is |θ·μ|.
  const std::size_t n = 10000;
  const Matrix p = gaussian_points(n, {0.0, 0.0}, 7);
  const Matrix q = gaussian_points(n, {2.0, 0.0}, 8);
  const Matrix dirs = ev::projection_directions(2, 128, 3);
  double oracle = 0.0;
  for (std::size_t k = 0; k < dirs.rows(); ++k) oracle += std::abs(2.0 * dirs(k, 0));
  oracle /= dirs.rows();
  const double sw = ev::sliced_wasserstein(p, q, 128, 3);
  CHECK(std::abs(sw - oracle) / oracle < 0.05);
}

TEST_CASE("sliced_wasserstein: pseudometric properties") {
  Rng rng(9);
  for (int trial = 0; trial < 20; ++trial) {
    const Matrix a = rng.normal_matrix(30, 3);
    const Matrix b = rng.normal_matrix(30, 3);
    Matrix c = rng.normal_matrix(30, 3);
    for (double& v : c.values()) v += 1.0;
    const double ab = ev::sliced_wasserstein(a, b, 32, trial);
    CHECK(ab == ev::sliced_wasserstein(b, a, 32, trial));
    CHECK(ab <= ev::sliced_wasserstein(a, c, 32, trial) + ev::sliced_wasserstein(c, b, 32, trial) +
                    1e-9);
    CHECK(ab == ev::sliced_wasserstein(a, b, 32, trial));
  }
}

TEST_CASE("energy_distance: zero, symmetry, point masses, positivity") {
  const Matrix a = gaussian_points(60, {0.0, 0.0}, 10);
  CHECK(std::abs(ev::energy_distance(a, a)) <= 1e-12);
  const Matrix b = gaussian_points(40, {1.0, 0.0}, 11);
  CHECK(ev::energy_distance(a, b) == doctest::Approx(ev::energy_distance(b, a)).epsilon(1e-13));
  CHECK(ev::energy_distance(Matrix::scalar(0.0), Matrix::scalar(1.0)) == 2.0);
  CHECK_THROWS_AS(ev::energy_distance(Matrix(0, 2), a), ContractViolation);

  // Small multisets over {0, 1, 2}: positive unless equal as multisets.
  const std::vector<std::vector<double>> sets{{0, 1}, {1, 0}, {0, 0}, {2, 1}, {1, 1}, {0, 2}};
  for (const auto& s : sets) {
    for (const auto& t : sets) {
      const double d = ev::energy_distance(Matrix(2, 1, s), Matrix(2, 1, t));
      auto ss = s;
      auto tt = t;
      std::sort(ss.begin(), ss.end());
      std::sort(tt.begin(), tt.end());
      if (ss == tt) {
        CHECK(std::abs(d) <= 1e-12);
      } else {
        CHECK(d > 1e-6);
      }
    }
  }
}

TEST_CASE("mode_coverage: point mass, empty set, balanced mixture") {
  const auto t = two_modes();
  const auto modes = t.modes(0);
  Matrix at_left(50, 2);
  for (std::size_t i = 0; i < 50; ++i) at_left(i, 0) = -3.0;
  const auto cov = ev::mode_coverage(at_left, modes);
  CHECK(cov.fractions == std::vector<double>{1.0, 0.0});
  CHECK(cov.collapsed);
  CHECK_THROWS_AS(ev::mode_coverage(Matrix(0, 2), modes), ContractViolation);

  const Matrix x = ev::sample_expert(t, 10000, 0, std::uint64_t{12});
  const auto balanced = ev::mode_coverage(x, modes);
  CHECK(std::abs(balanced.fractions[0] - 0.5) < 0.03);
  CHECK(std::abs(balanced.fractions[1] - 0.5) < 0.03);
  CHECK(balanced.fractions[0] + balanced.fractions[1] <= 1.0);
  CHECK_FALSE(balanced.collapsed);
}

TEST_CASE("disc_probe_accuracy: constant classifier and evaluate() determinism") {
  auto state = faillab::testing::small_state(2, 1, 13);
  auto& last = state.disc.head.layers.back();
  last.weight = Matrix(last.weight.rows(), last.weight.cols());
  last.bias = Matrix(1, 1);
  const Matrix e = gaussian_points(20, {0.0, 0.0}, 14);
  const Matrix p = gaussian_points(20, {5.0, 0.0}, 15);
  const std::vector<int> cond(20, 0);
  CHECK(ev::disc_probe_accuracy(state.disc, e, cond, p, cond) == 0.5);

  const auto target = two_modes();
  ev::EvalOptions options;
  options.samples = 200;
  options.seed = 16;
  const auto r1 = ev::evaluate(state.policy, &state.disc, target, options);
  const auto r2 = ev::evaluate(state.policy, &state.disc, target, options);
  CHECK(r1.sliced_wasserstein == r2.sliced_wasserstein);
  CHECK(r1.energy_distance == r2.energy_distance);
  CHECK(r1.mode_coverage == r2.mode_coverage);
  CHECK(r1.disc_probe_accuracy == 0.5);
  CHECK(std::isfinite(r1.sliced_wasserstein));
  CHECK(r1.sliced_wasserstein > 0.0);
  CHECK(r1.sample_count == 200);
}
