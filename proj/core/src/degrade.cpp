// Copyright 2026 The ScoreFusion Authors
// SPDX-License-Identifier: Apache-2.0

#include "scorefusion/degrade.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "scorefusion/errors.hpp"

namespace scorefusion {
namespace {

/// Visits every factor-sized block; fn receives the block origin.
template <class Fn>
void for_each_block(const DegradationOperator& op, const Dims& d, Fn&& fn) {
    for (std::size_t bi = 0; bi < d.d1; bi += op.factor[0])
        for (std::size_t bj = 0; bj < d.d2; bj += op.factor[1])
            for (std::size_t bk = 0; bk < d.d3; bk += op.factor[2]) fn(bi, bj, bk);
}

template <class Fn>
void for_each_voxel_in_block(const DegradationOperator& op, std::size_t bi, std::size_t bj, std::size_t bk, Fn&& fn) {
    for (std::size_t i = bi; i < bi + op.factor[0]; ++i)
        for (std::size_t j = bj; j < bj + op.factor[1]; ++j)
            for (std::size_t k = bk; k < bk + op.factor[2]; ++k) fn(i, j, k);
}

void check_pair(const Volume& a, const Volume& b) {
    if (a.dims() != b.dims()) {
        throw ShapeError("volume dims differ: " + to_string(a.dims()) + " vs " + to_string(b.dims()));
    }
}

}  // namespace

void DegradationOperator::check_dims(const Dims& d) const {
    static constexpr const char* names[] = {"d1", "d2", "d3"};
    for (int a = 0; a < 3; ++a) {
        if (factor[a] == 0) throw ConfigError("degradation factor must be positive");
        if (d[a] % factor[a] != 0) {
            throw ShapeError(std::string("dim ") + names[a] + " = " + std::to_string(d[a]) +
                             " is not divisible by degradation factor " + std::to_string(factor[a]));
        }
    }
}

Volume apply(const DegradationOperator& op, const Volume& y) {
    if (op.kind == DegradationKind::identity) return Volume(y.dims(), y.storage());
    op.check_dims(y.dims());
    Volume out(y.dims());
    const double inv = 1.0 / static_cast<double>(op.factor[0] * op.factor[1] * op.factor[2]);
    for_each_block(op, y.dims(), [&](std::size_t bi, std::size_t bj, std::size_t bk) {
        double sum = 0.0;
        for_each_voxel_in_block(op, bi, bj, bk, [&](std::size_t i, std::size_t j, std::size_t k) { sum += y(i, j, k); });
        const auto mean = static_cast<float>(sum * inv);
        for_each_voxel_in_block(op, bi, bj, bk, [&](std::size_t i, std::size_t j, std::size_t k) { out(i, j, k) = mean; });
    });
    return out;
}

double consistency_residual(const DegradationOperator& op, const Volume& y, const Volume& x) {
    check_pair(y, x);
    const Volume ay = apply(op, y);
    double worst = 0.0;
    for (std::size_t n = 0; n < ay.size(); ++n) {
        worst = std::max(worst, std::abs(static_cast<double>(ay[n]) - x[n]));
    }
    return worst;
}

Volume project_consistency(const DegradationOperator& op, const Volume& y0_hat, const Volume& x) {
    check_pair(y0_hat, x);
    const double off_range = consistency_residual(op, x, x);
    if (off_range > kConsistencyTolerance) {
        throw ConsistencyDomainError("condition is not in the range of the degradation operator (max |Ax - x| = " +
                                     std::to_string(off_range) + ")");
    }
    if (op.kind == DegradationKind::identity) return Volume(x.dims(), x.storage());
    op.check_dims(y0_hat.dims());
    // Block means stay in double. Rounding the corrected voxels back to float
    // leaves a block-sum residual of a few ulps that a second projection would
    // spread again, so it is absorbed greedily, largest voxel first. What is
    // left is below half an ulp of every voxel, which makes the float result a
    // fixed point: projecting twice gives bitwise the same volume.
    Volume out(y0_hat.dims());
    const double inv = 1.0 / static_cast<double>(op.factor[0] * op.factor[1] * op.factor[2]);
    std::vector<std::size_t> idx;
    for_each_block(op, y0_hat.dims(), [&](std::size_t bi, std::size_t bj, std::size_t bk) {
        idx.clear();
        double sum = 0.0, target = 0.0;
        for_each_voxel_in_block(op, bi, bj, bk, [&](std::size_t i, std::size_t j, std::size_t k) {
            idx.push_back(y0_hat.index(i, j, k));
            sum += y0_hat(i, j, k);
            target += x(i, j, k);
        });
        const double mean = sum * inv;
        double residual = -target;
        for (std::size_t n : idx) {
            out[n] = static_cast<float>(static_cast<double>(y0_hat[n]) - (mean - x[n]));
            residual += out[n];
        }
        if (residual == 0.0) return;
        std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return std::abs(out[a]) > std::abs(out[b]); });
        for (std::size_t n : idx) {
            const auto v = static_cast<float>(static_cast<double>(out[n]) - residual);
            residual -= static_cast<double>(out[n]) - v;
            out[n] = v;
            if (residual == 0.0) break;
        }
    });
    return out;
}

Volume project_consistency_boxed(const DegradationOperator& op, const Volume& y0_hat, const Volume& x, ValueRange box) {
    check_pair(y0_hat, x);
    if (box.degenerate()) throw RangeError("degenerate clamp box");
    const double off_range = consistency_residual(op, x, x);
    if (off_range > kConsistencyTolerance) {
        throw ConsistencyDomainError("condition is not in the range of the degradation operator (max |Ax - x| = " +
                                     std::to_string(off_range) + ")");
    }
    const DegradationOperator blocks =
        op.kind == DegradationKind::identity ? DegradationOperator{DegradationKind::identity, {1, 1, 1}} : op;
    if (op.kind != DegradationKind::identity) op.check_dims(y0_hat.dims());
    const double lo = box.lo, hi = box.hi;

    Volume out(y0_hat.dims());
    std::vector<double> vals;
    std::vector<std::size_t> idx;
    for_each_block(blocks, y0_hat.dims(), [&](std::size_t bi, std::size_t bj, std::size_t bk) {
        vals.clear();
        idx.clear();
        for_each_voxel_in_block(blocks, bi, bj, bk, [&](std::size_t i, std::size_t j, std::size_t k) {
            idx.push_back(y0_hat.index(i, j, k));
            vals.push_back(y0_hat[idx.back()]);
        });
        const double target = std::clamp(static_cast<double>(x[idx.front()]), lo, hi);
        const double n = static_cast<double>(vals.size());
        auto clamped_mean = [&](double tau) {
            double s = 0.0;
            for (double v : vals) s += std::clamp(v + tau, lo, hi);
            return s / n;
        };
        double mean = 0.0, vmin = vals.front(), vmax = vals.front();
        for (double v : vals) {
            mean += v;
            vmin = std::min(vmin, v);
            vmax = std::max(vmax, v);
        }
        mean /= n;
        double tau = target - mean;
        if (vmin + tau < lo || vmax + tau > hi) {
            // clamped_mean is nondecreasing in tau; bracket and bisect.
            double a = lo - vmax, b = hi - vmin;
            for (int it = 0; it < 200 && b - a > 1e-15; ++it) {
                const double m = 0.5 * (a + b);
                (clamped_mean(m) < target ? a : b) = m;
            }
            tau = 0.5 * (a + b);
        }
        for (std::size_t q = 0; q < vals.size(); ++q) {
            out[idx[q]] = static_cast<float>(std::clamp(vals[q] + tau, lo, hi));
        }
    });
    return out;
}

}  // namespace scorefusion
