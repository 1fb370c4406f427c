// Copyright 2026 The ScoreFusion Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "scorefusion/nn/params.hpp"

namespace scorefusion {

// "SFCK" container, version 1. All integers little-endian:
//   magic, u32 version, str kind, u32 n_config, n x (str key, str value),
//   u32 n_tensors, n x (str name, u64 count, count x f32),
//   u64 n_moments, m[n] f32, v[n] f32, i64 adam_step, i64 step, str rng_state
// where str is u32 length + bytes.
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
    std::string kind;  // "net2d" or "net3d"
    std::map<std::string, std::string> config;
    std::vector<std::pair<std::string, std::vector<float>>> tensors;
    std::vector<float> adam_m, adam_v;
    std::int64_t adam_step = 0;
    std::int64_t step = 0;
    std::string rng_state;

    /// Flat parameter vector in layout order; throws if names or sizes differ.
    std::vector<float> flat_params(const nn::ParamLayout& layout) const;
    void set_params(const nn::ParamLayout& layout, std::span<const float> values);

    /// Throws CheckpointError if any key in `expected` disagrees with the echo.
    void require_config(const std::map<std::string, std::string>& expected) const;
};

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& c);
Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes);

/// Written through a temp file and rename.
void save_checkpoint(const Checkpoint& c, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace scorefusion
