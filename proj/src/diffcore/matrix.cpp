// Copyright 2026 The fail-lab Authors
// SPDX-License-Identifier: Apache-2.0

#include "faillab/diffcore/matrix.hpp"

#include <algorithm>
#include <cmath>

#include "faillab/diffcore/kernels.hpp"

namespace faillab {

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> values)
    : rows_(rows), cols_(cols), data_(std::move(values)) {
  if (data_.size() != rows * cols) {
    throw ConfigurationError("matrix storage of " + std::to_string(data_.size()) +
                             " values does not fit shape " + std::to_string(rows) + "x" +
                             std::to_string(cols));
  }
}

Matrix Matrix::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
  const std::size_t r = rows.size();
  const std::size_t c = r == 0 ? 0 : rows.begin()->size();
  Matrix m(r, c);
  std::size_t i = 0;
  for (const auto& row : rows) {
    if (row.size() != c) throw ConfigurationError("ragged matrix literal");
    for (double v : row) m.data_[i++] = v;
  }
  return m;
}

Matrix Matrix::column(std::span<const double> values) {
  return Matrix(values.size(), 1, std::vector<double>(values.begin(), values.end()));
}

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

double Matrix::item() const {
  if (rows_ != 1 || cols_ != 1) {
    throw ContractViolation("item() on non-scalar matrix " + shape_string());
  }
  return data_[0];
}

bool Matrix::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

std::string Matrix::shape_string() const {
  return std::to_string(rows_) + "x" + std::to_string(cols_);
}

double global_norm(std::span<const Matrix> tensors) {
  double acc = 0.0;
  for (const auto& t : tensors) {
    for (double v : t.values()) acc += v * v;
  }
  return std::sqrt(acc);
}

double max_abs_diff(const Matrix& a, const Matrix& b) {
  if (!a.same_shape(b)) {
    throw ContractViolation("max_abs_diff shape mismatch " + a.shape_string() + " vs " +
                            b.shape_string());
  }
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::abs(a[i] - b[i]));
  return worst;
}

namespace kernels {

Matrix affine(const Matrix& x, const Matrix& weight, const Matrix& bias) {
  const std::size_t batch = x.rows();
  const std::size_t in = x.cols();
  const std::size_t out = weight.rows();
  if (weight.cols() != in || bias.rows() != 1 || bias.cols() != out) {
    throw ConfigurationError("affine shape mismatch: x " + x.shape_string() + ", W " +
                             weight.shape_string() + ", b " + bias.shape_string());
  }
  Matrix y(batch, out);
  for (std::size_t r = 0; r < batch; ++r) {
    const double* xr = x.values().data() + r * in;
    double* yr = y.values().data() + r * out;
    for (std::size_t o = 0; o < out; ++o) {
      const double* wr = weight.values().data() + o * in;
      double acc = bias[o];
      for (std::size_t i = 0; i < in; ++i) acc += xr[i] * wr[i];
      yr[o] = acc;
    }
  }
  return y;
}

Matrix matmul(const Matrix& g, const Matrix& w) {
  const std::size_t batch = g.rows();
  const std::size_t out = g.cols();
  const std::size_t in = w.cols();
  Matrix y(batch, in);
  for (std::size_t r = 0; r < batch; ++r) {
    double* yr = y.values().data() + r * in;
    for (std::size_t o = 0; o < out; ++o) {
      const double go = g(r, o);
      if (go == 0.0) continue;
      const double* wr = w.values().data() + o * in;
      for (std::size_t i = 0; i < in; ++i) yr[i] += go * wr[i];
    }
  }
  return y;
}

Matrix matmul_tn(const Matrix& g, const Matrix& x) {
  const std::size_t batch = g.rows();
  const std::size_t out = g.cols();
  const std::size_t in = x.cols();
  Matrix y(out, in);
  for (std::size_t r = 0; r < batch; ++r) {
    const double* xr = x.values().data() + r * in;
    for (std::size_t o = 0; o < out; ++o) {
      const double go = g(r, o);
      if (go == 0.0) continue;
      double* yr = y.values().data() + o * in;
      for (std::size_t i = 0; i < in; ++i) yr[i] += go * xr[i];
    }
  }
  return y;
}

void tanh_inplace(Matrix& m) {
  for (double& v : m.values()) v = std::tanh(v);
}

void relu_inplace(Matrix& m) {
  for (double& v : m.values()) v = v > 0.0 ? v : 0.0;
}

void sigmoid_inplace(Matrix& m) {
  for (double& v : m.values()) {
    v = v >= 0.0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v));
  }
}

}  // namespace kernels
}  // namespace faillab
