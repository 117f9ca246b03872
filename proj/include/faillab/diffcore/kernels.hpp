// Copyright 2026 The fail-lab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "faillab/diffcore/matrix.hpp"

// Forward kernels shared by the tape and by tape-free evaluation paths, so both
// produce bit-identical values.
namespace faillab::kernels {

/// out = x * W^T + b, with x: B x in, W: out x in, b: 1 x out.
Matrix affine(const Matrix& x, const Matrix& weight, const Matrix& bias);

/// out (B x in) = g (B x out) * W (out x in)
Matrix matmul(const Matrix& g, const Matrix& w);
/// out (out x in) = g^T (out x B) * x (B x in)
Matrix matmul_tn(const Matrix& g, const Matrix& x);

void tanh_inplace(Matrix& m);
void relu_inplace(Matrix& m);
void sigmoid_inplace(Matrix& m);

}  // namespace faillab::kernels
