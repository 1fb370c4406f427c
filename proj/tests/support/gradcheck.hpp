// Copyright 2026 The ScoreFusion Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "scorefusion/rng.hpp"

namespace scorefusion::testing {

struct GradCheckResult {
    double max_rel_error = 0.0;
    std::size_t probed = 0;
};

/// Compares analytic gradients with central differences at `probes`
/// randomly chosen coordinates. `loss(params, grads)` returns the loss and
/// accumulates gradients into `grads` when it is non-empty.
inline GradCheckResult gradient_check(
    std::vector<double> params,
    const std::function<double(std::span<const double>, std::span<double>)>& loss, std::size_t probes,
    std::uint64_t seed, double h = 1e-5) {
    std::vector<double> grads(params.size(), 0.0);
    loss(params, grads);
    std::vector<double> scratch;
    Rng rng(seed);
    std::vector<std::size_t> idx(params.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    for (std::size_t i = 0; i + 1 < idx.size(); ++i) {
        std::swap(idx[i], idx[static_cast<std::size_t>(rng.uniform_int(static_cast<std::int64_t>(i),
                                                                        static_cast<std::int64_t>(idx.size() - 1)))]);
    }
    GradCheckResult r;
    r.probed = std::min(probes, params.size());
    for (std::size_t k = 0; k < r.probed; ++k) {
        const std::size_t i = idx[k];
        const double keep = params[i];
        params[i] = keep + h;
        const double up = loss(params, scratch);
        params[i] = keep - h;
        const double down = loss(params, scratch);
        params[i] = keep;
        const double numeric = (up - down) / (2.0 * h);
        const double rel = std::abs(grads[i] - numeric) / std::max(1e-6, std::abs(grads[i]) + std::abs(numeric));
        r.max_rel_error = std::max(r.max_rel_error, rel);
    }
    return r;
}

}  // namespace scorefusion::testing
