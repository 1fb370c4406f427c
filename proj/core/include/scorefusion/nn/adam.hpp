// Copyright 2026 The ScoreFusion Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

namespace scorefusion::nn {

struct AdamConfig {
    double lr = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

/// Bias-corrected Adam over a flat parameter vector.
class Adam {
public:
    Adam() = default;
    Adam(AdamConfig cfg, std::size_t n) : cfg_(cfg), m_(n, 0.f), v_(n, 0.f) {}

    void update(std::span<float> params, std::span<const float> grads) {
        ++step_;
        const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(step_));
        const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(step_));
        for (std::size_t i = 0; i < params.size(); ++i) {
            const double g = grads[i];
            const double m = cfg_.beta1 * m_[i] + (1.0 - cfg_.beta1) * g;
            const double v = cfg_.beta2 * v_[i] + (1.0 - cfg_.beta2) * g * g;
            m_[i] = static_cast<float>(m);
            v_[i] = static_cast<float>(v);
            params[i] = static_cast<float>(params[i] - cfg_.lr * (m / c1) / (std::sqrt(v / c2) + cfg_.eps));
        }
    }

    const AdamConfig& config() const { return cfg_; }
    std::int64_t step() const { return step_; }
    const std::vector<float>& first_moment() const { return m_; }
    const std::vector<float>& second_moment() const { return v_; }

    void restore(std::vector<float> m, std::vector<float> v, std::int64_t step) {
        m_ = std::move(m);
        v_ = std::move(v);
        step_ = step;
    }

private:
    AdamConfig cfg_;
    std::vector<float> m_, v_;
    std::int64_t step_ = 0;
};

}  // namespace scorefusion::nn
