// Copyright 2026 The ScoreFusion Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "scorefusion/net2d.hpp"
#include "scorefusion/nn/unet.hpp"
#include "scorefusion/volume.hpp"

namespace scorefusion {

enum class Net3DVariant { full, small };

Net3DVariant parse_net3d_variant(const std::string& s);
std::string to_string(Net3DVariant v);

struct Net3DConfig {
    Net3DVariant variant = Net3DVariant::full;
    int condition_channels = 1;
    int branches = 2;  // K
    double lambda = 1.0;
    bool feature_injection = true;
    std::vector<int> channels{64, 128, 192, 256};
    int time_embed_dim = 256;
    int resblocks_per_level = 2;
    int convs_per_resblock = 2;
    int norm_groups = 32;
    /// Channels of the branch pyramids, one entry per level. Only used when
    /// feature injection is on.
    std::vector<int> branch_channels{64, 128, 256, 512};
    nn::Padding padding = nn::Padding::zeros;
    bool zero_output = true;  // false only in gradient checks

    int in_channels() const { return 1 + condition_channels + branches; }
    /// w and R for two branches; K logits and R otherwise.
    int out_channels() const { return branches == 2 ? 2 : branches + 1; }
    int levels() const { return static_cast<int>(channels.size()); }
    bool injects() const { return feature_injection && variant == Net3DVariant::full; }
    nn::UNetConfig unet() const;
    void validate() const;

    static Net3DConfig reference(Net3DVariant v, int condition_channels, int branches = 2);
    static Net3DConfig desk(Net3DVariant v, int condition_channels, const Net2DConfig& branch, int branches = 2);
};

class Net3D {
public:
    Net3D() = default;
    Net3D(const Net3DConfig& cfg, std::uint64_t seed);

    const Net3DConfig& config() const { return cfg_; }
    const nn::UNet& unet() const { return unet_; }
    const nn::ParamLayout& layout() const { return layout_; }
    const std::vector<nn::ConvSpec>& align() const { return align_; }
    std::vector<float>& params() { return params_; }
    const std::vector<float>& params() const { return params_; }
    std::size_t parameter_count() const { return params_.size(); }
    std::uint64_t checksum() const { return nn::checksum(params_); }

private:
    Net3DConfig cfg_;
    nn::ParamLayout layout_;
    nn::UNet unet_;
    std::vector<nn::ConvSpec> align_;  // bias-free 1x1x1 maps, one per level
    std::vector<float> params_;
};

Net3D build_net3d(const Net3DConfig& cfg, std::uint64_t seed);

struct FusionOutput {
    Volume w;  // two-branch weight field (empty when K > 2)
    Volume R;
    Volume eps3d;
    std::vector<Volume> coefficients;  // per-branch weights, summing to 1 voxelwise
};

/// Branch pyramids pooled along their slice axis and resampled to each 3D
/// level, before the learned pointwise map. Level l: (1, sum c, e1, e2, e3).
std::vector<nn::Tensor<float>> pool_pyramids(std::span<const BranchOutput* const> branches, const Dims& dims,
                                             int levels);

/// Aligned injections: the pooled features of every level passed through
/// that level's pointwise map. One (1, c_l, ...) tensor per 3D level.
std::vector<nn::Tensor<float>> align_features(const Net3D& net, std::span<const BranchOutput* const> branches,
                                              const Dims& dims);

/// Fusion forward. `branches` carries K score volumes (and pyramids when
/// injection is on); `x` carries the condition volumes.
FusionOutput forward_3d(const Net3D& net, const Volume& y_t, std::span<const Volume> x,
                        std::span<const BranchOutput* const> branches, int t);

/// Convex-plus-residual combination of the fusion head with the branch
/// scores. head: (1, out_ch, d, h, w); scores: (1, K, d, h, w).
template <class T>
nn::Var<T> fuse_scores(nn::Graph<T>& g, const nn::Var<T>& head, const nn::Tensor<T>& scores, double lambda);

/// One training example for the fusion network; branch outputs are constants.
struct FusionBatch {
    Volume y0;
    std::vector<Volume> x;
    int t = 1;
    Volume eps;
    std::vector<BranchOutput> branches;  // computed at y_t = q_sample(y0, t, eps)
};

/// Mean squared error between the fused score and eps. Gradients reach the
/// fusion parameters only.
LossResult loss_3d(const Net3D& net, const FusionBatch& batch, const NoiseSchedule& s);

/// Precision-generic form. `scores` is (1, K, ...), `pooled` the output of
/// pool_pyramids (ignored without injection), `input` the (1, 1 + C + K, ...)
/// network input.
template <class T>
double loss_3d_generic(const Net3D& net, std::span<const T> params, std::span<T> grads, const nn::Tensor<T>& input,
                       const nn::Tensor<T>& scores, std::span<const nn::Tensor<T>> pooled, int t,
                       const nn::Tensor<T>& eps);

/// Network input (1, 1 + C + K, d1, d2, d3): noisy target, conditions, scores.
template <class T>
nn::Tensor<T> fusion_input(const Volume& y_t, std::span<const Volume> x, std::span<const BranchOutput* const> branches);

}  // namespace scorefusion
