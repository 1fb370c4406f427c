// Copyright 2026 The ScoreFusion Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "scorefusion/nn/tensor.hpp"
#include "scorefusion/nn/unet.hpp"
#include "scorefusion/schedule.hpp"
#include "scorefusion/volume.hpp"

namespace scorefusion {

/// Slice denoiser configuration. Input channels are 1 (noisy target slice)
/// plus one per condition volume.
struct Net2DConfig {
    int condition_channels = 1;
    std::vector<int> channels{64, 128, 256, 512};
    int time_embed_dim = 256;
    int resblocks_per_level = 2;
    int convs_per_resblock = 3;
    int norm_groups = 32;
    nn::Padding padding = nn::Padding::zeros;
    bool zero_output = false;  // test-only: exact zero head

    int in_channels() const { return 1 + condition_channels; }
    int levels() const { return static_cast<int>(channels.size()); }
    nn::UNetConfig unet() const;

    /// Full-size architecture.
    static Net2DConfig reference(int condition_channels);
    /// Reduced widths used for CPU-scale experiments.
    static Net2DConfig desk(int condition_channels);
};

class Net2D {
public:
    Net2D() = default;
    Net2D(const Net2DConfig& cfg, std::uint64_t seed);

    const Net2DConfig& config() const { return cfg_; }
    const nn::UNet& unet() const { return unet_; }
    const nn::ParamLayout& layout() const { return layout_; }
    std::vector<float>& params() { return params_; }
    const std::vector<float>& params() const { return params_; }
    std::size_t parameter_count() const { return params_.size(); }
    std::uint64_t checksum() const { return nn::checksum(params_); }

private:
    Net2DConfig cfg_;
    nn::ParamLayout layout_;
    nn::UNet unet_;
    std::vector<float> params_;
};

Net2D build_net2d(const Net2DConfig& cfg, std::uint64_t seed);

/// Per-slice result for a batch of slices.
struct SliceOutput {
    nn::Tensor<float> eps;                    // (n, 1, 1, h, w)
    std::vector<nn::Tensor<float>> features;  // level l: (n, c_l, 1, h / 2^l, w / 2^l)
};

/// y_t: (n, 1, 1, h, w); x: (n, C, 1, h, w); one timestep per slice.
SliceOutput forward_2d(const Net2D& net, const nn::Tensor<float>& y_t, const nn::Tensor<float>& x,
                       std::span<const int> t);

/// Score volume and stacked feature pyramid of one branch. Pyramid level l
/// is stored in volume coordinates as (1, c_l, e1, e2, e3), where the two
/// in-plane extents are divided by 2^l and the slice axis keeps full extent.
struct BranchOutput {
    SliceAxis axis = SliceAxis::axis1;
    Volume eps_hat;
    std::vector<nn::Tensor<float>> pyramid;
};

/// Slice-wise evaluation of one branch over a whole volume. Slices are
/// processed in fixed-size chunks, so results do not depend on `workers`.
BranchOutput branch_forward(const Net2D& net, SliceAxis axis, const Volume& y_t, std::span<const Volume> x, int t,
                            int workers = 1, bool keep_pyramid = true);

/// Slices of `volumes` along `axis` packed as channels of an (n, C, 1, h, w) tensor.
template <class T>
nn::Tensor<T> slices_to_tensor(std::span<const Volume> volumes, SliceAxis axis, std::size_t first, std::size_t count);

struct LossResult {
    double loss = 0.0;
    std::vector<float> grads;
};

/// Mean squared error between predicted and true noise for a slice batch.
/// y0: (n, 1, 1, h, w); x: (n, C, 1, h, w); eps like y0.
LossResult loss_2d(const Net2D& net, const nn::Tensor<float>& y0, const nn::Tensor<float>& x, std::span<const int> t,
                   const nn::Tensor<float>& eps, const NoiseSchedule& s);

/// Precision-generic form used by the float path and by gradient checks.
/// Gradients are accumulated into `grads` (same layout as `params`).
template <class T>
double loss_2d_generic(const nn::UNet& unet, std::span<const T> params, std::span<T> grads, const nn::Tensor<T>& y0,
                       const nn::Tensor<T>& x, std::span<const int> t, const nn::Tensor<T>& eps,
                       const NoiseSchedule& s);

}  // namespace scorefusion
