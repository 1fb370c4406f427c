// Copyright 2026 The ScoreFusion Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace scorefusion::nn {

enum class InitKind {
    fan_in_uniform,  // U(-1/sqrt(fan_in), 1/sqrt(fan_in))
    ones,
    zeros,
};

struct ParamEntry {
    std::string name;
    std::vector<int> shape;
    std::size_t offset = 0;
    std::size_t count = 0;
    InitKind init = InitKind::fan_in_uniform;
    int fan_in = 1;
};

/// Flat parameter registry. Every tensor gets a contiguous slice of one
/// buffer, so optimizers and checkpoints can treat a model as a single vector.
class ParamLayout {
public:
    std::size_t add(std::string name, std::vector<int> shape, InitKind init, int fan_in = 1);

    const std::vector<ParamEntry>& entries() const { return entries_; }
    std::size_t total() const { return total_; }
    const ParamEntry& find(const std::string& name) const;

    /// Deterministic initial values; each entry draws from its own stream
    /// derived from (seed, entry index).
    std::vector<float> initialize(std::uint64_t seed) const;

private:
    std::vector<ParamEntry> entries_;
    std::size_t total_ = 0;
};

/// FNV-1a over the raw bytes of the values.
std::uint64_t checksum(std::span<const float> values);

}  // namespace scorefusion::nn
