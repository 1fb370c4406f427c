// Copyright 2026 The ScoreFusion Authors
// SPDX-License-Identifier: Apache-2.0

#include "scorefusion/nn/params.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "scorefusion/errors.hpp"
#include "scorefusion/rng.hpp"

namespace scorefusion::nn {

std::size_t ParamLayout::add(std::string name, std::vector<int> shape, InitKind init, int fan_in) {
    std::size_t count = 1;
    for (int s : shape) {
        if (s <= 0) throw ConfigError("parameter '" + name + "' has a non-positive extent");
        count *= static_cast<std::size_t>(s);
    }
    ParamEntry e{std::move(name), std::move(shape), total_, count, init, fan_in};
    total_ += count;
    entries_.push_back(std::move(e));
    return entries_.back().offset;
}

const ParamEntry& ParamLayout::find(const std::string& name) const {
    for (const auto& e : entries_) {
        if (e.name == name) return e;
    }
    throw ConfigError("no parameter named '" + name + "'");
}

std::vector<float> ParamLayout::initialize(std::uint64_t seed) const {
    std::vector<float> out(total_, 0.f);
    for (std::size_t i = 0; i < entries_.size(); ++i) {
        const ParamEntry& e = entries_[i];
        float* dst = out.data() + e.offset;
        switch (e.init) {
            case InitKind::zeros:
                break;
            case InitKind::ones:
                std::fill(dst, dst + e.count, 1.f);
                break;
            case InitKind::fan_in_uniform: {
                Rng rng(derive_seed(seed, i));
                const double bound = 1.0 / std::sqrt(static_cast<double>(e.fan_in));
                for (std::size_t k = 0; k < e.count; ++k) dst[k] = static_cast<float>(rng.uniform(-bound, bound));
                break;
            }
        }
    }
    return out;
}

std::uint64_t checksum(std::span<const float> values) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (float v : values) {
        unsigned char bytes[sizeof(float)];
        std::memcpy(bytes, &v, sizeof(float));
        for (unsigned char b : bytes) {
            h ^= b;
            h *= 0x100000001b3ULL;
        }
    }
    return h;
}

}  // namespace scorefusion::nn
