// Copyright 2026 The ScoreFusion Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <span>
#include <string>
#include <vector>

#include "scorefusion/nn/graph.hpp"
#include "scorefusion/nn/ops.hpp"
#include "scorefusion/nn/params.hpp"

namespace scorefusion::nn {

/// Time-conditioned U-Net shared by the slice denoisers (rank 2, kernels
/// 1x3x3 on d == 1 maps) and the fusion network (rank 3, kernels 3x3x3).
struct UNetConfig {
    int rank = 2;
    int in_channels = 2;
    int out_channels = 1;
    std::vector<int> channels{64, 128, 256, 512};
    int resblocks_per_level = 2;
    int convs_per_resblock = 3;
    int time_embed_dim = 256;
    int norm_groups = 32;
    Padding padding = Padding::zeros;
    bool zero_output = false;

    int levels() const { return static_cast<int>(channels.size()); }
    void validate() const;
};

struct ResBlockSpec {
    std::vector<GroupNormSpec> norms;
    std::vector<ConvSpec> convs;
    LinearSpec temb;
    ConvSpec skip;
    bool has_skip = false;
};

template <class T>
struct UNetResult {
    Var<T> out;
    /// Encoder output per level (after injection, before downsampling).
    std::vector<Var<T>> features;
};

class UNet {
public:
    UNet() = default;
    UNet(const UNetConfig& cfg, ParamLayout& layout, const std::string& prefix);

    const UNetConfig& config() const { return cfg_; }
    const ConvSpec& head() const { return head_; }

    /// `t` holds one timestep per batch item. `inject`, when non-empty, has
    /// one tensor per level that is added to that level's encoder output.
    template <class T>
    UNetResult<T> forward(Graph<T>& g, const Var<T>& x, std::span<const int> t, const ParamView<T>& p,
                          std::span<const Var<T>> inject = {}) const;

    /// Throws ShapeError naming the offending axis if x cannot be processed.
    template <class T>
    void check_input(const Tensor<T>& x) const;

private:
    ResBlockSpec make_block(ParamLayout& layout, const std::string& name, int in, int out);

    template <class T>
    Var<T> run_block(Graph<T>& g, const ResBlockSpec& b, const Var<T>& x, const Var<T>& temb_act,
                     const ParamView<T>& p) const;

    ConvSpec conv_spec(int in, int out, int stride) const;

    UNetConfig cfg_;
    ConvSpec input_;
    LinearSpec time1_, time2_;
    std::vector<std::vector<ResBlockSpec>> down_;
    std::vector<ConvSpec> downsample_;
    std::vector<ResBlockSpec> middle_;
    std::vector<std::vector<ResBlockSpec>> up_;
    std::vector<ConvSpec> upsample_;
    GroupNormSpec out_norm_;
    ConvSpec head_;
};

int group_count(int norm_groups, int channels);

}  // namespace scorefusion::nn
