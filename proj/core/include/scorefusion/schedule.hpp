// Copyright 2026 The ScoreFusion Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <vector>

#include "scorefusion/volume.hpp"

namespace scorefusion {

/// Linear variance schedule. Index t runs over [0, T]; t = 0 is clean data
/// (alpha_bar(0) = 1) and beta(t), alpha_bar(t) are defined for t in [1, T].
class NoiseSchedule {
public:
    NoiseSchedule() = default;

    int steps() const { return static_cast<int>(beta_.size()) - 1; }
    double beta(int t) const;
    double alpha_bar(int t) const;
    const std::vector<double>& betas() const { return beta_; }
    const std::vector<double>& alpha_bars() const { return alpha_bar_; }

    double beta_start() const { return beta_start_; }
    double beta_end() const { return beta_end_; }

private:
    friend NoiseSchedule make_linear_schedule(int T, double beta_start, double beta_end);

    std::vector<double> beta_;       // beta_[0] unused (0)
    std::vector<double> alpha_bar_;  // alpha_bar_[0] = 1
    double beta_start_ = 0.0;
    double beta_end_ = 0.0;
};

NoiseSchedule make_linear_schedule(int T = 1000, double beta_start = 1e-4, double beta_end = 0.02);

/// sqrt(ab_t) y0 + sqrt(1 - ab_t) eps.
Volume q_sample(const Volume& y0, int t, const Volume& eps, const NoiseSchedule& s);

/// (y_t - sqrt(1 - ab_t) eps_hat) / sqrt(ab_t). At t = T the divisor is tiny
/// (about 6e-3 for the default schedule) and noise in eps_hat is amplified.
Volume estimate_y0(const Volume& y_t, const Volume& eps_hat, int t, const NoiseSchedule& s);

/// sqrt(ab_prev) y0_hat + sqrt(1 - ab_prev) eps. Same closed form as q_sample.
Volume renoise(const Volume& y0_hat, int t_prev, const Volume& eps, const NoiseSchedule& s);

/// Deterministic mean of renoise (eps = 0).
Volume renoise_mean(const Volume& y0_hat, int t_prev, const NoiseSchedule& s);

enum class SamplerMode { ddpm, ddim };

SamplerMode parse_sampler_mode(const std::string& s);
std::string to_string(SamplerMode m);

/// Reverse-time visiting order. `timesteps` holds the noisy levels the
/// denoiser is evaluated at, strictly decreasing from T; step k moves from
/// timesteps[k] to target(k), which is timesteps[k+1] or 0 (clean) for the
/// last step. In zero-based schedule indices (t - 1) the sequence is drawn
/// from [0, T) and ends at 0.
struct StepPlan {
    SamplerMode mode = SamplerMode::ddim;
    std::vector<int> timesteps;

    std::size_t size() const { return timesteps.size(); }
    int target(std::size_t k) const { return k + 1 < timesteps.size() ? timesteps[k + 1] : 0; }
};

/// Evenly spaced plan with inference_steps entries: round(T - k (T - 1) / (S - 1)).
/// ddpm mode ignores inference_steps and visits every level T..1.
StepPlan make_step_plan(const NoiseSchedule& s, SamplerMode mode, int inference_steps);

}  // namespace scorefusion
