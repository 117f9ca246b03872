// Copyright 2026 The fail-lab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "faillab/diffcore/matrix.hpp"

namespace faillab::adversary {

/// Power-iteration estimate of the largest singular value of `weight`.
/// `u` (rows x 1) is the persisted left-vector estimate; it is initialised
/// when empty and refined in place by `iters` iterations.
double leading_singular_value(const Matrix& weight, Matrix& u, int iters);

/// Returns weight / sigma_max, with sigma_max estimated as above. A zero
/// matrix is returned unchanged.
Matrix spectral_normalize(const Matrix& weight, Matrix& u, int iters);

}  // namespace faillab::adversary
