// Copyright 2026 The ScoreFusion Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "scorefusion/checkpoint.hpp"
#include "scorefusion/net2d.hpp"
#include "scorefusion/net3d.hpp"
#include "scorefusion/nn/adam.hpp"
#include "scorefusion/phantom.hpp"
#include "scorefusion/rng.hpp"
#include "scorefusion/schedule.hpp"

namespace scorefusion {

/// Paired examples in model range [-1, 1].
struct Dataset {
    std::vector<TaskInputs> items;

    bool empty() const { return items.empty(); }
    std::size_t size() const { return items.size(); }
};

Dataset load_dataset(const Manifest& m, Split split, Task task, const DegradationOperator& op);

struct TrainConfig {
    double lr = 5e-5;
    int batch = 4;
    std::int64_t steps = 1000;
    /// 3D only: steps on patches, then `finetune_steps` on full volumes.
    std::array<std::size_t, 3> patch{16, 16, 16};
    bool finetune = true;
    std::int64_t finetune_steps = 0;
    std::uint64_t seed = 0;
    int workers = 1;
    std::int64_t log_every = 50;
};

struct TelemetryRecord {
    std::int64_t step = 0;
    double loss = 0.0;
    double lr = 0.0;
    double wall_ms = 0.0;
};

/// `step,loss,lr,wall_ms` with fixed formatting.
std::string format_telemetry(const TelemetryRecord& r);

using TelemetrySink = std::function<void(const TelemetryRecord&)>;

/// Slice-denoiser training along one axis. Each step draws `batch` (volume,
/// slice, t, eps) tuples from the trainer's own RNG stream and takes one
/// Adam step on their mean loss.
class Trainer2D {
public:
    Trainer2D(Net2D net, SliceAxis axis, const NoiseSchedule& s, const TrainConfig& cfg);

    double step(const Dataset& data);
    void run(const Dataset& data, std::int64_t steps, const TelemetrySink& sink = {});

    Checkpoint checkpoint(const std::map<std::string, std::string>& config_echo) const;
    void restore(const Checkpoint& c);

    const Net2D& net() const { return net_; }
    Net2D& net() { return net_; }
    std::int64_t steps_done() const { return step_; }
    const Rng& rng() const { return rng_; }

private:
    Net2D net_;
    SliceAxis axis_;
    NoiseSchedule schedule_;
    TrainConfig cfg_;
    nn::Adam adam_;
    Rng rng_;
    std::int64_t step_ = 0;
};

/// A frozen slice denoiser fed by a subset of the condition volumes.
struct Branch {
    const Net2D* net = nullptr;
    SliceAxis axis = SliceAxis::axis1;
    std::vector<int> conditions{0};
};

/// Evaluates every branch slice-wise on (y_t, x) at timestep t.
std::vector<BranchOutput> precompute_branch_outputs(std::span<const Branch> branches, const Volume& y_t,
                                                    std::span<const Volume> x, int t, int workers = 1,
                                                    bool keep_pyramid = true);

/// Fusion-network training with frozen branches: `steps` patch steps, then
/// `finetune_steps` full-volume steps when finetune is on.
class Trainer3D {
public:
    Trainer3D(Net3D net, std::vector<Branch> branches, const NoiseSchedule& s, const TrainConfig& cfg);

    double step(const Dataset& data);
    void run(const Dataset& data, const TelemetrySink& sink = {});
    std::int64_t total_steps() const;
    bool in_patch_phase() const { return step_ < cfg_.steps; }

    Checkpoint checkpoint(const std::map<std::string, std::string>& config_echo) const;
    void restore(const Checkpoint& c);

    const Net3D& net() const { return net_; }
    Net3D& net() { return net_; }
    std::int64_t steps_done() const { return step_; }

private:
    Net3D net_;
    std::vector<Branch> branches_;
    NoiseSchedule schedule_;
    TrainConfig cfg_;
    nn::Adam adam_;
    Rng rng_;
    std::int64_t step_ = 0;
};

}  // namespace scorefusion
