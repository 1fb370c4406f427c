// Copyright 2026 The ScoreFusion Authors
// SPDX-License-Identifier: Apache-2.0

#include "scorefusion/train.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>

#include "scorefusion/errors.hpp"
#include "scorefusion/volume_io.hpp"

namespace scorefusion {
namespace {

using Clock = std::chrono::steady_clock;

void check_finite(double loss, std::int64_t step, const std::string& what) {
    if (!std::isfinite(loss)) {
        throw TrainingError(what + " loss became non-finite at step " + std::to_string(step) + " (loss=" +
                            std::to_string(loss) + "); aborting");
    }
}

Volume normal_volume(const Dims& d, Rng& rng) {
    Volume v(d);
    for (auto& x : v.storage()) x = static_cast<float>(rng.normal());
    return v;
}

Checkpoint make_checkpoint(const std::string& kind, const nn::ParamLayout& layout, const std::vector<float>& params,
                           const nn::Adam& adam, std::int64_t step, const Rng& rng,
                           const std::map<std::string, std::string>& echo) {
    Checkpoint c;
    c.kind = kind;
    c.config = echo;
    c.set_params(layout, params);
    c.adam_m = adam.first_moment();
    c.adam_v = adam.second_moment();
    c.adam_step = adam.step();
    c.step = step;
    c.rng_state = rng.state();
    return c;
}

void restore_common(const Checkpoint& c, const std::string& kind, const nn::ParamLayout& layout,
                    std::vector<float>& params, nn::Adam& adam, std::int64_t& step, Rng& rng) {
    if (c.kind != kind) throw CheckpointError("expected a " + kind + " checkpoint, got '" + c.kind + "'");
    params = c.flat_params(layout);
    if (c.adam_m.size() != params.size()) throw CheckpointError("optimizer state does not match the parameter count");
    adam.restore(c.adam_m, c.adam_v, c.adam_step);
    step = c.step;
    rng.set_state(c.rng_state);
}

}  // namespace

Dataset load_dataset(const Manifest& m, Split split, Task task, const DegradationOperator& op) {
    Dataset d;
    for (const auto& r : m.records) {
        if (r.split != split) continue;
        PhantomPair p{load_volume(r.path_a), load_volume(r.path_b)};
        d.items.push_back(to_model_range(make_task_inputs(p, task, op)));
    }
    return d;
}

std::string format_telemetry(const TelemetryRecord& r) {
    char buf[128];
    std::snprintf(buf, sizeof buf, "%lld,%.8g,%.6g,%.3f", static_cast<long long>(r.step), r.loss, r.lr, r.wall_ms);
    return buf;
}

// ---------------------------------------------------------------------------

Trainer2D::Trainer2D(Net2D net, SliceAxis axis, const NoiseSchedule& s, const TrainConfig& cfg)
    : net_(std::move(net)),
      axis_(axis),
      schedule_(s),
      cfg_(cfg),
      adam_(nn::AdamConfig{cfg.lr}, net_.parameter_count()),
      rng_(derive_seed(cfg.seed, 0x2d00 + static_cast<int>(axis))) {
    if (cfg.batch < 1) throw ConfigError("train batch must be at least 1");
    if (!(cfg.lr > 0.0)) throw ConfigError("learning rate must be positive");
}

double Trainer2D::step(const Dataset& data) {
    if (data.empty()) throw TrainingError("training dataset is empty");
    const Dims d = data.items.front().y0.dims();
    const std::size_t n_slices = axis_ == SliceAxis::axis1 ? d.d2 : d.d3;
    const int B = cfg_.batch;
    const int C = net_.config().condition_channels;
    const int H = static_cast<int>(d.d1), W = static_cast<int>(axis_ == SliceAxis::axis1 ? d.d3 : d.d2);

    nn::Tensor<float> y0(B, 1, 1, H, W), x(B, C, 1, H, W), eps(B, 1, 1, H, W);
    std::vector<int> ts(static_cast<std::size_t>(B));
    for (int b = 0; b < B; ++b) {
        const auto& item = data.items[static_cast<std::size_t>(rng_.uniform_int(0, static_cast<std::int64_t>(data.size()) - 1))];
        if (item.y0.dims() != d) throw ShapeError("training volumes must share dims");
        if (static_cast<int>(item.x.size()) != C) throw ShapeError("condition count does not match net2d config");
        const auto slice = static_cast<std::size_t>(rng_.uniform_int(0, static_cast<std::int64_t>(n_slices) - 1));
        ts[static_cast<std::size_t>(b)] = static_cast<int>(rng_.uniform_int(1, schedule_.steps()));
        const auto ys = slices_to_tensor<float>(std::span<const Volume>(&item.y0, 1), axis_, slice, 1);
        const auto xs = slices_to_tensor<float>(item.x, axis_, slice, 1);
        std::copy(ys.data.begin(), ys.data.end(), y0.channel(b, 0));
        std::copy(xs.data.begin(), xs.data.end(), x.channel(b, 0));
        float* e = eps.channel(b, 0);
        for (std::size_t i = 0; i < eps.item_size(); ++i) e[i] = static_cast<float>(rng_.normal());
    }
    LossResult r = loss_2d(net_, y0, x, ts, eps, schedule_);
    check_finite(r.loss, step_ + 1, "net2d");
    adam_.update(net_.params(), r.grads);
    ++step_;
    return r.loss;
}

void Trainer2D::run(const Dataset& data, std::int64_t steps, const TelemetrySink& sink) {
    const auto start = Clock::now();
    for (std::int64_t i = 0; i < steps; ++i) {
        const double loss = step(data);
        if (sink && (step_ % std::max<std::int64_t>(cfg_.log_every, 1) == 0 || i + 1 == steps)) {
            sink({step_, loss, cfg_.lr, std::chrono::duration<double, std::milli>(Clock::now() - start).count()});
        }
    }
}

Checkpoint Trainer2D::checkpoint(const std::map<std::string, std::string>& echo) const {
    return make_checkpoint("net2d", net_.layout(), net_.params(), adam_, step_, rng_, echo);
}

void Trainer2D::restore(const Checkpoint& c) {
    restore_common(c, "net2d", net_.layout(), net_.params(), adam_, step_, rng_);
}

// ---------------------------------------------------------------------------

std::vector<BranchOutput> precompute_branch_outputs(std::span<const Branch> branches, const Volume& y_t,
                                                    std::span<const Volume> x, int t, int workers,
                                                    bool keep_pyramid) {
    std::vector<BranchOutput> out;
    out.reserve(branches.size());
    for (const Branch& b : branches) {
        if (!b.net) throw ConfigError("branch without a network");
        std::vector<Volume> cond;
        for (int c : b.conditions) {
            if (c < 0 || c >= static_cast<int>(x.size())) throw ShapeError("branch condition index out of range");
            cond.push_back(x[static_cast<std::size_t>(c)]);
        }
        out.push_back(branch_forward(*b.net, b.axis, y_t, cond, t, workers, keep_pyramid));
    }
    return out;
}

Trainer3D::Trainer3D(Net3D net, std::vector<Branch> branches, const NoiseSchedule& s, const TrainConfig& cfg)
    : net_(std::move(net)),
      branches_(std::move(branches)),
      schedule_(s),
      cfg_(cfg),
      adam_(nn::AdamConfig{cfg.lr}, net_.parameter_count()),
      rng_(derive_seed(cfg.seed, 0x3d00)) {
    if (static_cast<int>(branches_.size()) != net_.config().branches) {
        throw ConfigError("fusion network expects " + std::to_string(net_.config().branches) + " branches, got " +
                          std::to_string(branches_.size()));
    }
    for (const auto& b : branches_) {
        if (!b.net) throw ConfigError("missing branch network");
    }
    if (!(cfg.lr > 0.0)) throw ConfigError("learning rate must be positive");
}

std::int64_t Trainer3D::total_steps() const { return cfg_.steps + (cfg_.finetune ? cfg_.finetune_steps : 0); }

double Trainer3D::step(const Dataset& data) {
    if (data.empty()) throw TrainingError("training dataset is empty");
    const auto& item = data.items[static_cast<std::size_t>(rng_.uniform_int(0, static_cast<std::int64_t>(data.size()) - 1))];
    FusionBatch batch;
    if (in_patch_phase()) {
        PatchSpec spec;
        spec.extent = cfg_.patch;
        const Dims d = item.y0.dims();
        for (int a = 0; a < 3; ++a) {
            if (spec.extent[static_cast<std::size_t>(a)] > d[a]) {
                throw ConfigError("patch extent exceeds volume dims " + to_string(d));
            }
            spec.origin[static_cast<std::size_t>(a)] =
                static_cast<std::size_t>(rng_.uniform_int(0, static_cast<std::int64_t>(d[a] - spec.extent[static_cast<std::size_t>(a)])));
        }
        spec.validate(d);
        const Dims ext{spec.extent[0], spec.extent[1], spec.extent[2]};
        batch.y0 = crop_box(item.y0, spec.origin, ext);
        for (const auto& v : item.x) batch.x.push_back(crop_box(v, spec.origin, ext));
    } else {
        batch.y0 = item.y0;
        batch.x = item.x;
    }
    batch.t = static_cast<int>(rng_.uniform_int(1, schedule_.steps()));
    batch.eps = normal_volume(batch.y0.dims(), rng_);
    const Volume y_t = q_sample(batch.y0, batch.t, batch.eps, schedule_);
    batch.branches = precompute_branch_outputs(branches_, y_t, batch.x, batch.t, cfg_.workers, net_.config().injects());

    LossResult r = loss_3d(net_, batch, schedule_);
    check_finite(r.loss, step_ + 1, "net3d");
    adam_.update(net_.params(), r.grads);
    ++step_;
    return r.loss;
}

void Trainer3D::run(const Dataset& data, const TelemetrySink& sink) {
    const auto start = Clock::now();
    const std::int64_t total = total_steps();
    while (step_ < total) {
        const double loss = step(data);
        if (sink && (step_ % std::max<std::int64_t>(cfg_.log_every, 1) == 0 || step_ == total)) {
            sink({step_, loss, cfg_.lr, std::chrono::duration<double, std::milli>(Clock::now() - start).count()});
        }
    }
}

Checkpoint Trainer3D::checkpoint(const std::map<std::string, std::string>& echo) const {
    return make_checkpoint("net3d", net_.layout(), net_.params(), adam_, step_, rng_, echo);
}

void Trainer3D::restore(const Checkpoint& c) {
    restore_common(c, "net3d", net_.layout(), net_.params(), adam_, step_, rng_);
}

}  // namespace scorefusion
