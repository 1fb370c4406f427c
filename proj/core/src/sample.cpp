// Copyright 2026 The ScoreFusion Authors
// SPDX-License-Identifier: Apache-2.0

#include "scorefusion/sample.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "scorefusion/errors.hpp"
#include "scorefusion/rng.hpp"

namespace scorefusion {
namespace {

Volume normal_volume(const Dims& d, Rng& rng) {
    Volume v(d);
    for (auto& x : v.storage()) x = static_cast<float>(rng.normal());
    return v;
}

Volume average_scores(std::span<const BranchOutput> outs) {
    const Dims d = outs.front().eps_hat.dims();
    Volume avg(d);
    if (outs.size() == 2) {
        // Same expression the fusion head reduces to at w = 0, R = 0.
        const auto& a = outs[0].eps_hat.storage();
        const auto& b = outs[1].eps_hat.storage();
        for (std::size_t i = 0; i < avg.size(); ++i) avg[i] = 0.5f * a[i] + 0.5f * b[i];
        return avg;
    }
    const float inv = 1.0f / static_cast<float>(outs.size());
    for (std::size_t i = 0; i < avg.size(); ++i) {
        float acc = 0.f;
        for (const auto& o : outs) acc += o.eps_hat[i];
        avg[i] = acc * inv;
    }
    return avg;
}

void check_models(const SamplerModels& m, std::span<const Volume> x, const SampleConfig& cfg) {
    if (!m.schedule) throw ConfigError("sampler needs a noise schedule");
    if (m.branches.size() < 2) throw ConfigError("sampler needs at least two branches");
    if (x.empty()) throw ShapeError("sampler needs at least one condition volume");
    if (cfg.plan.timesteps.empty()) throw ConfigError("empty step plan");
    if (cfg.plan.timesteps.front() > m.schedule->steps() || cfg.plan.timesteps.back() < 1) {
        throw RangeError("step plan leaves the schedule range [1, T]");
    }
    if (cfg.fusion == FusionMode::learned) {
        if (!m.fusion) throw ConfigError("learned fusion needs a 3D checkpoint");
        if (m.fusion->config().branches != static_cast<int>(m.branches.size())) {
            throw ConfigError("fusion network expects " + std::to_string(m.fusion->config().branches) +
                              " branches, got " + std::to_string(m.branches.size()));
        }
    }
    const Dims d = x.front().dims();
    for (const auto& v : x) {
        if (v.dims() != d) throw ShapeError("condition volumes differ in dims");
    }
    if (d.d1 % 8 || d.d2 % 8 || d.d3 % 8) throw ShapeError("sampled volume dims must be divisible by 8, got " + to_string(d));
    if (cfg.consistency) {
        if (cfg.consistency_condition < 0 || cfg.consistency_condition >= static_cast<int>(x.size())) {
            throw ConfigError("consistency condition index out of range");
        }
        cfg.op.check_dims(d);
    }
}

}  // namespace

FusionMode parse_fusion_mode(const std::string& s) {
    if (s == "learned") return FusionMode::learned;
    if (s == "average") return FusionMode::average;
    throw ConfigError("fusion must be learned or average, got '" + s + "'");
}

std::string to_string(FusionMode m) { return m == FusionMode::learned ? "learned" : "average"; }

Volume sample_volume(const SamplerModels& m, std::span<const Volume> x, const SampleConfig& cfg,
                     const StepObserver& observer) {
    check_models(m, x, cfg);
    const NoiseSchedule& s = *m.schedule;
    const Dims d = x.front().dims();
    const Volume* xc = cfg.consistency ? &x[static_cast<std::size_t>(cfg.consistency_condition)] : nullptr;
    const bool learned = cfg.fusion == FusionMode::learned;
    const bool pyramids = learned && m.fusion->config().injects();

    Rng rng(cfg.seed);
    Volume y = normal_volume(d, rng);
    Volume y0_hat;
    for (std::size_t k = 0; k < cfg.plan.size(); ++k) {
        const int t = cfg.plan.timesteps[k];
        const int target = cfg.plan.target(k);
        const auto outs = precompute_branch_outputs(m.branches, y, x, t, cfg.workers, pyramids);
        Volume eps;
        if (learned) {
            std::vector<const BranchOutput*> ptrs;
            for (const auto& o : outs) ptrs.push_back(&o);
            eps = forward_3d(*m.fusion, y, x, ptrs, t).eps3d;
        } else {
            eps = average_scores(outs);
        }
        y0_hat = estimate_y0(y, eps, t, s);
        StepTrace tr{k, t, target, std::numeric_limits<double>::quiet_NaN()};
        if (xc) {
            y0_hat = project_consistency(cfg.op, y0_hat, *xc);
            tr.residual = consistency_residual(cfg.op, y0_hat, *xc);
        }
        if (observer) observer(tr, y0_hat);
        if (target == 0) break;
        y = cfg.fresh_noise ? renoise(y0_hat, target, normal_volume(d, rng), s) : renoise_mean(y0_hat, target, s);
    }

    if (xc) return project_consistency_boxed(cfg.op, y0_hat, *xc, kModelRange);
    Volume out(d);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::clamp(y0_hat[i], kModelRange.lo, kModelRange.hi);
    return out;
}

UncertaintyStats summarize_runs(std::span<const Volume> runs) {
    if (runs.size() < 2) throw ConfigError("uncertainty needs at least two runs");
    const Dims d = runs.front().dims();
    UncertaintyStats st{Volume(d), Volume(d), static_cast<int>(runs.size())};
    const double n = static_cast<double>(runs.size());
    for (std::size_t i = 0; i < st.mean.size(); ++i) {
        double sum = 0.0;
        for (const auto& r : runs) sum += r[i];
        const double mu = sum / n;
        double ss = 0.0;
        for (const auto& r : runs) ss += (r[i] - mu) * (r[i] - mu);
        st.mean[i] = static_cast<float>(mu);
        st.std[i] = static_cast<float>(std::sqrt(ss / (n - 1.0)));
    }
    return st;
}

UncertainSample sample_with_uncertainty(const SamplerModels& m, std::span<const Volume> x, const SampleConfig& cfg) {
    if (cfg.runs < 2) throw ConfigError("uncertainty needs runs >= 2, got " + std::to_string(cfg.runs));
    std::vector<Volume> runs;
    for (int r = 0; r < cfg.runs; ++r) {
        SampleConfig c = cfg;
        c.seed = r == 0 ? cfg.seed : derive_seed(cfg.seed, static_cast<std::uint64_t>(r));
        runs.push_back(sample_volume(m, x, c));
    }
    UncertainSample out;
    out.stats = summarize_runs(runs);
    out.point = std::move(runs.front());
    return out;
}

Volume fuse_multimodality(const SamplerModels& m, std::span<const Volume> x, const SampleConfig& cfg,
                          const StepObserver& observer) {
    if (m.branches.size() != 2 * x.size()) {
        throw ConfigError("multi-condition fusion needs one branch pair per condition: " + std::to_string(x.size()) +
                          " conditions, " + std::to_string(m.branches.size()) + " branches");
    }
    for (std::size_t c = 0; c < x.size(); ++c) {
        const Branch& a = m.branches[2 * c];
        const Branch& b = m.branches[2 * c + 1];
        if (a.axis == b.axis) throw ConfigError("branch pair " + std::to_string(c) + " is not perpendicular");
        if (a.conditions != std::vector<int>{static_cast<int>(c)} || b.conditions != a.conditions) {
            throw ConfigError("branch pair " + std::to_string(c) + " must read condition " + std::to_string(c));
        }
    }
    return sample_volume(m, x, cfg, observer);
}

}  // namespace scorefusion
