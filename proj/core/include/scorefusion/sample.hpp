// Copyright 2026 The ScoreFusion Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "scorefusion/degrade.hpp"
#include "scorefusion/net3d.hpp"
#include "scorefusion/schedule.hpp"
#include "scorefusion/train.hpp"
#include "scorefusion/volume.hpp"

namespace scorefusion {

enum class FusionMode { learned, average };

FusionMode parse_fusion_mode(const std::string& s);
std::string to_string(FusionMode m);

struct SampleConfig {
    StepPlan plan;
    bool consistency = false;
    /// Condition volume the projection matches (the pooled one).
    int consistency_condition = 0;
    DegradationOperator op = DegradationOperator::avg_pool(4);
    int runs = 1;
    FusionMode fusion = FusionMode::learned;
    std::uint64_t seed = 0;
    /// Fresh Gaussian noise at each renoise; off gives the deterministic loop.
    bool fresh_noise = true;
    int workers = 1;
};

struct StepTrace {
    std::size_t k = 0;
    int t = 0;
    int target = 0;
    /// max |A y0_hat - x| after projection; NaN when projection is off.
    double residual = 0.0;
};

using StepObserver = std::function<void(const StepTrace&, const Volume& y0_hat)>;

/// Everything the sampling loop needs besides the conditions.
struct SamplerModels {
    std::span<const Branch> branches;
    /// Ignored in average mode; may then be null.
    const Net3D* fusion = nullptr;
    const NoiseSchedule* schedule = nullptr;
};

/// One reverse trajectory in model range. Returns a volume in [-1, 1].
Volume sample_volume(const SamplerModels& m, std::span<const Volume> x, const SampleConfig& cfg,
                     const StepObserver& observer = {});

struct UncertaintyStats {
    Volume mean;
    Volume std;  // sample std, ddof = 1
    int n = 0;
};

struct UncertainSample {
    Volume point;  // first run
    UncertaintyStats stats;
};

/// Voxelwise mean and ddof=1 std over runs; needs at least two.
UncertaintyStats summarize_runs(std::span<const Volume> runs);

/// cfg.runs trajectories; run 0 uses cfg.seed, run r > 0 derive_seed(seed, r).
UncertainSample sample_with_uncertainty(const SamplerModels& m, std::span<const Volume> x, const SampleConfig& cfg);

/// K-branch fusion across conditions: branches must come in perpendicular
/// pairs, one pair per condition volume.
Volume fuse_multimodality(const SamplerModels& m, std::span<const Volume> x, const SampleConfig& cfg,
                          const StepObserver& observer = {});

}  // namespace scorefusion
