// Copyright 2026 The ScoreFusion Authors
// SPDX-License-Identifier: Apache-2.0

#include "scorefusion/schedule.hpp"

#include <cmath>

#include "scorefusion/errors.hpp"

namespace scorefusion {
namespace {

void check_t(const NoiseSchedule& s, int t, const char* what) {
    if (t < 0 || t > s.steps()) {
        throw RangeError(std::string(what) + ": timestep " + std::to_string(t) + " outside [0, " +
                         std::to_string(s.steps()) + "]");
    }
}

void check_same_dims(const Volume& a, const Volume& b) {
    if (a.dims() != b.dims()) throw ShapeError("noise dims " + to_string(b.dims()) + " differ from " + to_string(a.dims()));
}

Volume mix(const Volume& a, double ca, const Volume& b, double cb) {
    Volume out(a.dims());
    for (std::size_t n = 0; n < out.size(); ++n) {
        out[n] = static_cast<float>(ca * a[n] + cb * b[n]);
    }
    return out;
}

}  // namespace

double NoiseSchedule::beta(int t) const {
    if (t < 1 || t > steps()) throw RangeError("beta index out of range: " + std::to_string(t));
    return beta_[static_cast<std::size_t>(t)];
}

double NoiseSchedule::alpha_bar(int t) const {
    if (t < 0 || t > steps()) throw RangeError("alpha_bar index out of range: " + std::to_string(t));
    return alpha_bar_[static_cast<std::size_t>(t)];
}

NoiseSchedule make_linear_schedule(int T, double beta_start, double beta_end) {
    if (T < 1) throw ConfigError("diffusion.T must be >= 1");
    if (!(beta_start > 0.0) || !(beta_start <= beta_end) || !(beta_end < 1.0)) {
        throw ConfigError("require 0 < beta_start <= beta_end < 1");
    }
    NoiseSchedule s;
    s.beta_start_ = beta_start;
    s.beta_end_ = beta_end;
    s.beta_.assign(static_cast<std::size_t>(T) + 1, 0.0);
    s.alpha_bar_.assign(static_cast<std::size_t>(T) + 1, 1.0);
    double log_ab = 0.0;
    for (int t = 1; t <= T; ++t) {
        const double frac = T == 1 ? 0.0 : static_cast<double>(t - 1) / static_cast<double>(T - 1);
        const double b = beta_start + (beta_end - beta_start) * frac;
        s.beta_[static_cast<std::size_t>(t)] = b;
        log_ab += std::log1p(-b);
        s.alpha_bar_[static_cast<std::size_t>(t)] = std::exp(log_ab);
    }
    return s;
}

Volume q_sample(const Volume& y0, int t, const Volume& eps, const NoiseSchedule& s) {
    check_t(s, t, "q_sample");
    check_same_dims(y0, eps);
    const double ab = s.alpha_bar(t);
    return mix(y0, std::sqrt(ab), eps, std::sqrt(1.0 - ab));
}

Volume estimate_y0(const Volume& y_t, const Volume& eps_hat, int t, const NoiseSchedule& s) {
    check_t(s, t, "estimate_y0");
    check_same_dims(y_t, eps_hat);
    const double ab = s.alpha_bar(t);
    const double inv = 1.0 / std::sqrt(ab);
    return mix(y_t, inv, eps_hat, -std::sqrt(1.0 - ab) * inv);
}

Volume renoise(const Volume& y0_hat, int t_prev, const Volume& eps, const NoiseSchedule& s) {
    return q_sample(y0_hat, t_prev, eps, s);
}

Volume renoise_mean(const Volume& y0_hat, int t_prev, const NoiseSchedule& s) {
    check_t(s, t_prev, "renoise");
    const double c = std::sqrt(s.alpha_bar(t_prev));
    Volume out(y0_hat.dims());
    for (std::size_t n = 0; n < out.size(); ++n) out[n] = static_cast<float>(c * y0_hat[n]);
    return out;
}

SamplerMode parse_sampler_mode(const std::string& s) {
    if (s == "ddim") return SamplerMode::ddim;
    if (s == "ddpm") return SamplerMode::ddpm;
    throw ConfigError("diffusion.mode must be ddim or ddpm, got '" + s + "'");
}

std::string to_string(SamplerMode m) { return m == SamplerMode::ddim ? "ddim" : "ddpm"; }

StepPlan make_step_plan(const NoiseSchedule& s, SamplerMode mode, int inference_steps) {
    const int T = s.steps();
    if (inference_steps < 1 || inference_steps > T) {
        throw ConfigError("diffusion.inference_steps must be in [1, " + std::to_string(T) + "], got " +
                          std::to_string(inference_steps));
    }
    StepPlan plan;
    plan.mode = mode;
    const int S = mode == SamplerMode::ddpm ? T : inference_steps;
    plan.timesteps.reserve(static_cast<std::size_t>(S));
    if (S == 1) {
        plan.timesteps.push_back(T);
        return plan;
    }
    const double stride = static_cast<double>(T - 1) / static_cast<double>(S - 1);
    for (int k = 0; k < S; ++k) {
        plan.timesteps.push_back(static_cast<int>(std::lround(static_cast<double>(T) - k * stride)));
    }
    return plan;
}

}  // namespace scorefusion
