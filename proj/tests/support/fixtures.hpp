// Copyright 2026 The ScoreFusion Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>

#include "scorefusion/degrade.hpp"
#include "scorefusion/net2d.hpp"
#include "scorefusion/net3d.hpp"
#include "scorefusion/phantom.hpp"
#include "scorefusion/rng.hpp"
#include "scorefusion/train.hpp"

namespace scorefusion::testing {

/// Two-level nets small enough for millisecond steps on 8^3 volumes.
inline Net2DConfig micro2d(int conditions = 1) {
    Net2DConfig c = Net2DConfig::desk(conditions);
    c.channels = {4, 8};
    c.time_embed_dim = 8;
    c.norm_groups = 2;
    return c;
}

inline Net3DConfig micro3d(const Net2DConfig& b, int conditions = 1, int branches = 2, bool injection = true) {
    Net3DConfig c = Net3DConfig::desk(Net3DVariant::full, conditions, b, branches);
    c.channels = {4, 8};
    c.time_embed_dim = 8;
    c.norm_groups = 2;
    c.feature_injection = injection;
    return c;
}

inline Volume random_volume(Dims d, Rng& rng, double scale = 1.0) {
    Volume v(d);
    for (auto& x : v.storage()) x = static_cast<float>(scale * rng.normal());
    return v;
}

/// Model-range SR examples: smooth random targets with x = A(y0).
inline Dataset sr_dataset(std::size_t n, Dims d, std::uint64_t seed) {
    Dataset data;
    const auto op = DegradationOperator::avg_pool(4);
    for (std::size_t i = 0; i < n; ++i) {
        Rng rng(derive_seed(seed, i));
        Volume y = gaussian_blur(random_volume(d, rng), 1.0);
        for (auto& v : y.storage()) v = std::clamp(v * 2.f, -1.f, 1.f);
        TaskInputs t;
        t.x.push_back(apply(op, y));
        t.y0 = std::move(y);
        data.items.push_back(std::move(t));
    }
    return data;
}

inline std::filesystem::path temp_dir(const std::string& name) {
    const auto p = std::filesystem::temp_directory_path() / "scorefusion_tests" / name;
    std::filesystem::remove_all(p);
    std::filesystem::create_directories(p);
    return p;
}

}  // namespace scorefusion::testing
