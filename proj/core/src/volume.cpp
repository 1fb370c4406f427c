// Copyright 2026 The ScoreFusion Authors
// SPDX-License-Identifier: Apache-2.0

#include "scorefusion/volume.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "scorefusion/errors.hpp"

namespace scorefusion {

std::string to_string(const Dims& d) {
    std::ostringstream os;
    os << d.d1 << "x" << d.d2 << "x" << d.d3;
    return os.str();
}

Volume::Volume(Dims dims, float fill) : dims_(dims), data_(dims.count(), fill) {}

Volume::Volume(Dims dims, std::vector<float> data, std::optional<ValueRange> range)
    : dims_(dims), data_(std::move(data)) {
    if (data_.size() != dims_.count()) {
        throw DimensionError("volume payload has " + std::to_string(data_.size()) + " voxels, dims " +
                             to_string(dims_) + " need " + std::to_string(dims_.count()));
    }
    for (std::size_t n = 0; n < data_.size(); ++n) {
        if (!std::isfinite(data_[n])) {
            throw RangeError("non-finite voxel at linear index " + std::to_string(n));
        }
    }
    if (range) declare_range(*range);
}

void Volume::declare_range(ValueRange r) {
    if (r.degenerate()) throw RangeError("degenerate value range");
    for (std::size_t n = 0; n < data_.size(); ++n) {
        if (data_[n] < r.lo || data_[n] > r.hi) {
            std::ostringstream os;
            os << "voxel " << n << " = " << data_[n] << " outside declared range [" << r.lo << ", " << r.hi << "]";
            throw RangeError(os.str());
        }
    }
    range_ = r;
}

SliceAxis parse_slice_axis(int axis) {
    if (axis == 1) return SliceAxis::axis1;
    if (axis == 2) return SliceAxis::axis2;
    throw ConfigError("slice axis must be 1 or 2, got " + std::to_string(axis));
}

void PatchSpec::validate(const Dims& dims) const {
    static constexpr const char* names[] = {"d1", "d2", "d3"};
    for (int a = 0; a < 3; ++a) {
        if (extent[a] == 0 || extent[a] % 8 != 0) {
            throw DimensionError(std::string("patch extent on axis ") + names[a] + " must be a positive multiple of 8, got " +
                                 std::to_string(extent[a]));
        }
        if (origin[a] + extent[a] > dims[a]) {
            throw DimensionError(std::string("patch exceeds volume on axis ") + names[a] + ": " +
                                 std::to_string(origin[a]) + "+" + std::to_string(extent[a]) + " > " +
                                 std::to_string(dims[a]));
        }
    }
}

std::array<std::size_t, 3> center_crop_offsets(const Dims& dims, const Dims& target) {
    static constexpr const char* names[] = {"d1", "d2", "d3"};
    std::array<std::size_t, 3> off{};
    for (int a = 0; a < 3; ++a) {
        if (target[a] > dims[a]) {
            throw DimensionError(std::string("crop target exceeds volume on axis ") + names[a] + ": " +
                                 std::to_string(target[a]) + " > " + std::to_string(dims[a]));
        }
        off[a] = (dims[a] - target[a]) / 2;
    }
    return off;
}

Volume crop_box(const Volume& v, const std::array<std::size_t, 3>& origin, const Dims& extent) {
    Volume out(extent);
    for (std::size_t i = 0; i < extent.d1; ++i)
        for (std::size_t j = 0; j < extent.d2; ++j)
            for (std::size_t k = 0; k < extent.d3; ++k)
                out(i, j, k) = v(origin[0] + i, origin[1] + j, origin[2] + k);
    return out;
}

Volume center_crop(const Volume& v, const Dims& target) {
    return crop_box(v, center_crop_offsets(v.dims(), target), target);
}

SliceStack extract_slices(const Volume& v, SliceAxis axis) {
    const Dims& d = v.dims();
    SliceStack s;
    s.axis = axis;
    s.source_dims = d;
    if (axis == SliceAxis::axis1) {
        s.slices.resize(d.d2);
        for (std::size_t j = 0; j < d.d2; ++j) {
            Grid2D& g = s.slices[j];
            g.rows = d.d1;
            g.cols = d.d3;
            g.data.resize(d.d1 * d.d3);
            for (std::size_t i = 0; i < d.d1; ++i)
                for (std::size_t k = 0; k < d.d3; ++k) g(i, k) = v(i, j, k);
        }
    } else {
        s.slices.resize(d.d3);
        for (std::size_t k = 0; k < d.d3; ++k) {
            Grid2D& g = s.slices[k];
            g.rows = d.d1;
            g.cols = d.d2;
            g.data.resize(d.d1 * d.d2);
            for (std::size_t i = 0; i < d.d1; ++i)
                for (std::size_t j = 0; j < d.d2; ++j) g(i, j) = v(i, j, k);
        }
    }
    return s;
}

Volume reassemble(const SliceStack& s) {
    const Dims& d = s.source_dims;
    const bool a1 = s.axis == SliceAxis::axis1;
    const std::size_t expected = a1 ? d.d2 : d.d3;
    if (s.count() != expected) {
        throw ShapeError("slice stack has " + std::to_string(s.count()) + " slices, expected " + std::to_string(expected));
    }
    Volume v(d);
    for (std::size_t n = 0; n < s.count(); ++n) {
        const Grid2D& g = s.slices[n];
        if (g.rows != d.d1 || g.cols != (a1 ? d.d3 : d.d2)) throw ShapeError("slice " + std::to_string(n) + " has wrong shape");
        for (std::size_t r = 0; r < g.rows; ++r)
            for (std::size_t c = 0; c < g.cols; ++c) {
                if (a1) v(r, n, c) = g(r, c);
                else v(r, c, n) = g(r, c);
            }
    }
    return v;
}

std::pair<Volume, Volume> crop_patch(const std::pair<Volume, Volume>& pair, const PatchSpec& spec) {
    if (pair.first.dims() != pair.second.dims()) {
        throw PairingError("paired volumes differ in dims: " + to_string(pair.first.dims()) + " vs " +
                           to_string(pair.second.dims()));
    }
    spec.validate(pair.first.dims());
    const Dims extent{spec.extent[0], spec.extent[1], spec.extent[2]};
    return {crop_box(pair.first, spec.origin, extent), crop_box(pair.second, spec.origin, extent)};
}

Volume normalize(const Volume& v, ValueRange from, ValueRange to) {
    if (from.degenerate()) throw RangeError("normalize: degenerate source range");
    const double scale = (static_cast<double>(to.hi) - to.lo) / (static_cast<double>(from.hi) - from.lo);
    Volume out(v.dims());
    auto src = v.data();
    auto dst = out.data();
    for (std::size_t n = 0; n < src.size(); ++n) {
        dst[n] = static_cast<float>((src[n] - static_cast<double>(from.lo)) * scale + to.lo);
    }
    if (v.value_range() && *v.value_range() == from) {
        // Rounding can push an endpoint a few ulps outside; pin it back.
        const float lo = std::min(to.lo, to.hi), hi = std::max(to.lo, to.hi);
        for (float& x : dst) x = std::clamp(x, lo, hi);
        if (!to.degenerate()) out.declare_range(to);
    }
    return out;
}

}  // namespace scorefusion
