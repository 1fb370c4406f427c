// Copyright 2026 The ScoreFusion Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstddef>

#include "scorefusion/volume.hpp"

namespace scorefusion {

enum class DegradationKind { avg_pool_resize, identity };

/// Linear degradation y -> A y acting on full-resolution volumes. For
/// avg_pool_resize, A replaces every voxel by the mean of its factor-sized
/// block (pool, then broadcast back), so A is an orthogonal projector.
struct DegradationOperator {
    DegradationKind kind = DegradationKind::avg_pool_resize;
    std::array<std::size_t, 3> factor{4, 4, 4};

    static DegradationOperator avg_pool(std::size_t f) { return {DegradationKind::avg_pool_resize, {f, f, f}}; }
    static DegradationOperator identity() { return {DegradationKind::identity, {1, 1, 1}}; }

    /// Throws ShapeError when a dim is not divisible by its factor.
    void check_dims(const Dims& d) const;
};

/// Tolerance used for the range-membership precondition of project_consistency.
inline constexpr double kConsistencyTolerance = 1e-5;

Volume apply(const DegradationOperator& op, const Volume& y);

/// max |A y - x|.
double consistency_residual(const DegradationOperator& op, const Volume& y, const Volume& x);

/// y0_hat - (A y0_hat - x). Valid because A is idempotent and x = A x; the
/// precondition is checked and a ConsistencyDomainError thrown otherwise.
Volume project_consistency(const DegradationOperator& op, const Volume& y0_hat, const Volume& x);

/// Euclidean projection of y0_hat onto {z : A z = x, lo <= z <= hi}. Each
/// block is solved independently as clamp(y + tau) with tau found by bisection.
/// Agrees with project_consistency (up to rounding) whenever that result
/// already lies in the box.
Volume project_consistency_boxed(const DegradationOperator& op, const Volume& y0_hat, const Volume& x, ValueRange box);

}  // namespace scorefusion
