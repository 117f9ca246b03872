// Copyright 2026 The fail-lab Authors
// SPDX-License-Identifier: Apache-2.0

#include "faillab/adversary/spectral_norm.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "faillab/diffcore/rng.hpp"

namespace faillab::adversary {
namespace {

double normalize(std::vector<double>& v) {
  double n = 0.0;
  for (double x : v) n += x * x;
  n = std::sqrt(n);
  if (n > 0.0) {
    for (double& x : v) x /= n;
  }
  return n;
}

}  // namespace

double leading_singular_value(const Matrix& weight, Matrix& u, int iters) {
  if (iters < 1) throw ContractViolation("spectral normalization needs iters >= 1");
  const std::size_t rows = weight.rows();
  const std::size_t cols = weight.cols();
  if (u.rows() != rows || u.cols() != 1) {
    Rng rng(0x5eed5eedULL + rows * 131 + cols);
    u = rng.normal_matrix(rows, 1);
  }
  std::vector<double> uv(u.values().begin(), u.values().end());
  normalize(uv);
  std::vector<double> v(cols, 0.0);
  double sigma = 0.0;
  for (int it = 0; it < iters; ++it) {
    std::fill(v.begin(), v.end(), 0.0);
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t c = 0; c < cols; ++c) v[c] += weight(r, c) * uv[r];
    if (normalize(v) == 0.0) return 0.0;
    std::fill(uv.begin(), uv.end(), 0.0);
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t c = 0; c < cols; ++c) uv[r] += weight(r, c) * v[c];
    // ‖W v‖ with unit v is the current estimate.
    sigma = normalize(uv);
    if (sigma == 0.0) return 0.0;
  }
  for (std::size_t r = 0; r < rows; ++r) u[r] = uv[r];
  return sigma;
}

Matrix spectral_normalize(const Matrix& weight, Matrix& u, int iters) {
  const double sigma = leading_singular_value(weight, u, iters);
  if (sigma == 0.0) return weight;
  Matrix out = weight;
  for (double& x : out.values()) x /= sigma;
  return out;
}

}  // namespace faillab::adversary
