// Copyright 2026 The ScoreFusion Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace scorefusion {

/// Extent of a volume along its three axes (d1, d2, d3).
struct Dims {
    std::size_t d1 = 0;
    std::size_t d2 = 0;
    std::size_t d3 = 0;

    constexpr std::size_t count() const { return d1 * d2 * d3; }
    constexpr std::size_t operator[](int axis) const { return axis == 0 ? d1 : axis == 1 ? d2 : d3; }
    friend constexpr bool operator==(const Dims&, const Dims&) = default;
};

std::string to_string(const Dims& d);

/// Closed interval intensities are declared to live in.
struct ValueRange {
    float lo = 0.f;
    float hi = 1.f;

    constexpr bool degenerate() const { return !(hi > lo); }
    friend constexpr bool operator==(const ValueRange&, const ValueRange&) = default;
};

/// Intensity range the denoisers operate in.
inline constexpr ValueRange kModelRange{-1.f, 1.f};
/// Intensity range metrics are computed in.
inline constexpr ValueRange kMetricRange{0.f, 1.f};

/// Dense real-valued 3D grid stored in C order (last axis fastest).
class Volume {
public:
    Volume() = default;
    explicit Volume(Dims dims, float fill = 0.f);

    /// Ingest constructor: checks length, finiteness and (if given) range membership.
    Volume(Dims dims, std::vector<float> data, std::optional<ValueRange> range = std::nullopt);

    const Dims& dims() const { return dims_; }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    std::span<float> data() { return data_; }
    std::span<const float> data() const { return data_; }
    std::vector<float>& storage() { return data_; }
    const std::vector<float>& storage() const { return data_; }

    std::size_t index(std::size_t i, std::size_t j, std::size_t k) const {
        return (i * dims_.d2 + j) * dims_.d3 + k;
    }
    float& operator()(std::size_t i, std::size_t j, std::size_t k) { return data_[index(i, j, k)]; }
    float operator()(std::size_t i, std::size_t j, std::size_t k) const { return data_[index(i, j, k)]; }
    float& operator[](std::size_t n) { return data_[n]; }
    float operator[](std::size_t n) const { return data_[n]; }

    const std::optional<ValueRange>& value_range() const { return range_; }
    /// Declares a range after verifying every voxel lies in it.
    void declare_range(ValueRange r);
    void clear_range() { range_.reset(); }

    friend bool operator==(const Volume& a, const Volume& b) {
        return a.dims_ == b.dims_ && a.data_ == b.data_;
    }

private:
    Dims dims_{};
    std::vector<float> data_;
    std::optional<ValueRange> range_;
};

/// The two volume axes the 2D denoisers slice along: axis 1 yields
/// grids v[:, i, :] of shape (d1, d3); axis 2 yields v[:, :, j] of shape (d1, d2).
enum class SliceAxis : int { axis1 = 1, axis2 = 2 };

SliceAxis parse_slice_axis(int axis);

struct Grid2D {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<float> data;  // row-major

    float operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
    float& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
    friend bool operator==(const Grid2D&, const Grid2D&) = default;
};

struct SliceStack {
    SliceAxis axis = SliceAxis::axis1;
    Dims source_dims{};
    std::vector<Grid2D> slices;

    std::size_t count() const { return slices.size(); }
};

/// Axis-aligned box inside a volume. Extents must be multiples of 8.
struct PatchSpec {
    std::array<std::size_t, 3> origin{};
    std::array<std::size_t, 3> extent{};

    void validate(const Dims& dims) const;
};

/// Offsets used by center_crop: floor((dims - target) / 2) per axis, so an
/// odd margin drops its extra voxel from the high-index side.
std::array<std::size_t, 3> center_crop_offsets(const Dims& dims, const Dims& target);
Volume center_crop(const Volume& v, const Dims& target);

/// Extracts the sub-box [origin, origin + extent) without divisibility checks.
Volume crop_box(const Volume& v, const std::array<std::size_t, 3>& origin, const Dims& extent);

SliceStack extract_slices(const Volume& v, SliceAxis axis);
Volume reassemble(const SliceStack& s);

std::pair<Volume, Volume> crop_patch(const std::pair<Volume, Volume>& pair, const PatchSpec& spec);

/// Affine map sending `from` onto `to`. The result carries `to` as its declared
/// range only if the input's declared range was `from`.
Volume normalize(const Volume& v, ValueRange from, ValueRange to);
inline Volume denormalize(const Volume& v, ValueRange from, ValueRange to) { return normalize(v, to, from); }

}  // namespace scorefusion
