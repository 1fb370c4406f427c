// Copyright 2026 The ScoreFusion Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "scorefusion/volume.hpp"

namespace scorefusion {

// SFV1 layout: "SFV1" magic, three little-endian u32 dims (d1, d2, d3), then
// d1*d2*d3 little-endian IEEE-754 float32 voxels in C order.
inline constexpr std::size_t kSfvHeaderBytes = 16;
/// Upper bound on voxel count accepted by the reader.
inline constexpr std::uint64_t kMaxVoxels = std::uint64_t{1} << 31;

std::vector<std::uint8_t> encode_sfv(const Volume& v);
Volume decode_sfv(std::span<const std::uint8_t> bytes);

void save_volume(const Volume& v, const std::filesystem::path& path);
Volume load_volume(const std::filesystem::path& path);

/// A single-file NIfTI-1 image. The original 348-byte header is kept so that
/// orientation fields (qform/sform, pixdim, xyzt_units) survive a roundtrip.
struct NiftiImage {
    Volume volume;
    std::array<std::uint8_t, 348> header{};
    bool has_header = false;
};

/// Reads .nii (float32/float64/int16/uint8/int32 payloads, either byte order).
/// Voxel (i, j, k) of the returned volume is NIfTI voxel (x=i, y=j, z=k);
/// scl_slope/scl_inter are applied.
NiftiImage load_nifti(const std::filesystem::path& path);

/// Writes a little-endian float32 .nii. When `img.has_header` the stored header
/// is reused with only dim/datatype/bitpix/vox_offset/scl fields rewritten.
void save_nifti(const NiftiImage& img, const std::filesystem::path& path);

/// Writes `bytes` to a sibling temp file and renames it over `path`.
void write_file_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> read_file(const std::filesystem::path& path);

}  // namespace scorefusion
