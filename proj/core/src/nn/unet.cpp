// Copyright 2026 The ScoreFusion Authors
// SPDX-License-Identifier: Apache-2.0

#include "scorefusion/nn/unet.hpp"

#include <numeric>

#include "scorefusion/errors.hpp"

namespace scorefusion::nn {

int group_count(int norm_groups, int channels) { return std::gcd(norm_groups, channels); }

void UNetConfig::validate() const {
    if (rank != 2 && rank != 3) throw ConfigError("unet rank must be 2 or 3");
    if (in_channels < 1 || out_channels < 1) throw ConfigError("unet channel counts must be positive");
    if (channels.empty()) throw ConfigError("unet needs at least one level");
    for (int c : channels) {
        if (c < 1) throw ConfigError("unet level channels must be positive");
    }
    if (resblocks_per_level < 1 || convs_per_resblock < 1) throw ConfigError("unet block counts must be positive");
    if (time_embed_dim < 2 || channels.front() < 2) throw ConfigError("time embedding needs at least 2 features");
    if (norm_groups < 1) throw ConfigError("norm_groups must be positive");
}

ConvSpec UNet::conv_spec(int in, int out, int stride) const {
    ConvSpec s;
    s.in = in;
    s.out = out;
    s.kernel = cfg_.rank == 3 ? std::array<int, 3>{3, 3, 3} : std::array<int, 3>{1, 3, 3};
    s.stride = stride == 1 ? std::array<int, 3>{1, 1, 1}
                           : (cfg_.rank == 3 ? std::array<int, 3>{stride, stride, stride} : std::array<int, 3>{1, stride, stride});
    s.padding = cfg_.padding;
    return s;
}

namespace {

void register_conv(ParamLayout& layout, const std::string& name, ConvSpec& s, InitKind init = InitKind::fan_in_uniform) {
    const int fan_in = s.in * s.taps();
    s.weight = layout.add(name + ".weight", {s.out, s.in, s.kernel[0], s.kernel[1], s.kernel[2]}, init, fan_in);
    s.bias = layout.add(name + ".bias", {s.out}, init, fan_in);
}

void register_linear(ParamLayout& layout, const std::string& name, LinearSpec& s) {
    s.weight = layout.add(name + ".weight", {s.out, s.in}, InitKind::fan_in_uniform, s.in);
    s.bias = layout.add(name + ".bias", {s.out}, InitKind::fan_in_uniform, s.in);
}

GroupNormSpec register_norm(ParamLayout& layout, const std::string& name, int channels, int groups) {
    GroupNormSpec s;
    s.channels = channels;
    s.groups = group_count(groups, channels);
    s.gamma = layout.add(name + ".gamma", {channels}, InitKind::ones);
    s.beta = layout.add(name + ".beta", {channels}, InitKind::zeros);
    return s;
}

}  // namespace

ResBlockSpec UNet::make_block(ParamLayout& layout, const std::string& name, int in, int out) {
    ResBlockSpec b;
    for (int k = 0; k < cfg_.convs_per_resblock; ++k) {
        const int cin = k == 0 ? in : out;
        b.norms.push_back(register_norm(layout, name + ".norm" + std::to_string(k), cin, cfg_.norm_groups));
        ConvSpec c = conv_spec(cin, out, 1);
        register_conv(layout, name + ".conv" + std::to_string(k), c);
        b.convs.push_back(c);
        if (k == 0) {
            b.temb.in = cfg_.time_embed_dim;
            b.temb.out = out;
            register_linear(layout, name + ".temb", b.temb);
        }
    }
    if (in != out) {
        b.has_skip = true;
        b.skip = conv_spec(in, out, 1);
        b.skip.kernel = {1, 1, 1};
        register_conv(layout, name + ".skip", b.skip);
    }
    return b;
}

UNet::UNet(const UNetConfig& cfg, ParamLayout& layout, const std::string& prefix) : cfg_(cfg) {
    cfg_.validate();
    const int L = cfg_.levels();
    const auto& ch = cfg_.channels;

    input_ = conv_spec(cfg_.in_channels, ch[0], 1);
    register_conv(layout, prefix + "input", input_);
    time1_ = {ch[0], cfg_.time_embed_dim};
    register_linear(layout, prefix + "time.0", time1_);
    time2_ = {cfg_.time_embed_dim, cfg_.time_embed_dim};
    register_linear(layout, prefix + "time.2", time2_);

    int cur = ch[0];
    for (int l = 0; l < L; ++l) {
        std::vector<ResBlockSpec> blocks;
        for (int r = 0; r < cfg_.resblocks_per_level; ++r) {
            const std::string name = prefix + "down." + std::to_string(l) + ".block." + std::to_string(r);
            blocks.push_back(make_block(layout, name, cur, ch[l]));
            cur = ch[l];
        }
        down_.push_back(std::move(blocks));
        if (l + 1 < L) {
            ConvSpec d = conv_spec(cur, cur, 2);
            register_conv(layout, prefix + "down." + std::to_string(l) + ".downsample", d);
            downsample_.push_back(d);
        }
    }
    for (int r = 0; r < 2; ++r) {
        middle_.push_back(make_block(layout, prefix + "middle.block." + std::to_string(r), cur, cur));
    }
    for (int l = L - 1; l >= 0; --l) {
        std::vector<ResBlockSpec> blocks;
        for (int r = 0; r < cfg_.resblocks_per_level; ++r) {
            const std::string name = prefix + "up." + std::to_string(l) + ".block." + std::to_string(r);
            blocks.push_back(make_block(layout, name, cur, ch[l]));
            cur = ch[l];
        }
        up_.push_back(std::move(blocks));
        if (l > 0) {
            ConvSpec u = conv_spec(cur, cur, 1);
            register_conv(layout, prefix + "up." + std::to_string(l) + ".upsample", u);
            upsample_.push_back(u);
        }
    }
    out_norm_ = register_norm(layout, prefix + "out.norm", cur, cfg_.norm_groups);
    head_ = conv_spec(cur, cfg_.out_channels, 1);
    register_conv(layout, prefix + "out.conv", head_, cfg_.zero_output ? InitKind::zeros : InitKind::fan_in_uniform);
}

template <class T>
void UNet::check_input(const Tensor<T>& x) const {
    if (x.c != cfg_.in_channels) {
        throw ShapeError("channel axis: expected " + std::to_string(cfg_.in_channels) + " input channels, got " +
                         std::to_string(x.c));
    }
    const int div = 1 << (cfg_.levels() - 1);
    const auto check = [&](int extent, const char* axis) {
        if (extent < 1 || extent % div != 0) {
            throw ShapeError(std::string(axis) + " axis: extent " + std::to_string(extent) + " is not divisible by " +
                             std::to_string(div));
        }
    };
    if (cfg_.rank == 3) {
        check(x.d, "first");
        check(x.h, "second");
        check(x.w, "third");
    } else {
        if (x.d != 1) throw ShapeError("depth axis: 2D maps must have depth 1");
        check(x.h, "row");
        check(x.w, "column");
    }
}

template <class T>
Var<T> UNet::run_block(Graph<T>& g, const ResBlockSpec& b, const Var<T>& x, const Var<T>& temb_act,
                       const ParamView<T>& p) const {
    Var<T> h = x;
    for (std::size_t k = 0; k < b.convs.size(); ++k) {
        h = conv(g, silu(g, group_norm(g, h, b.norms[k], p)), b.convs[k], p);
        if (k == 0) h = add_channel_bias(g, h, linear(g, temb_act, b.temb, p));
    }
    const Var<T> skip = b.has_skip ? conv(g, x, b.skip, p) : x;
    return add(g, skip, h);
}

template <class T>
UNetResult<T> UNet::forward(Graph<T>& g, const Var<T>& x, std::span<const int> t, const ParamView<T>& p,
                            std::span<const Var<T>> inject) const {
    check_input(x->value);
    if (static_cast<int>(t.size()) != x->value.n) throw ShapeError("batch axis: one timestep per item required");
    const int L = cfg_.levels();
    if (!inject.empty() && static_cast<int>(inject.size()) != L) {
        throw PyramidError("expected " + std::to_string(L) + " injection levels, got " + std::to_string(inject.size()));
    }

    const Var<T> temb0 = g.constant(timestep_embedding<T>(t, cfg_.channels.front()));
    const Var<T> temb = linear(g, silu(g, linear(g, temb0, time1_, p)), time2_, p);
    const Var<T> temb_act = silu(g, temb);

    UNetResult<T> res;
    Var<T> h = conv(g, x, input_, p);
    for (int l = 0; l < L; ++l) {
        for (const auto& b : down_[static_cast<std::size_t>(l)]) h = run_block(g, b, h, temb_act, p);
        if (!inject.empty() && inject[static_cast<std::size_t>(l)]) h = add(g, h, inject[static_cast<std::size_t>(l)]);
        res.features.push_back(h);
        if (l + 1 < L) h = conv(g, h, downsample_[static_cast<std::size_t>(l)], p);
    }
    for (const auto& b : middle_) h = run_block(g, b, h, temb_act, p);
    for (int k = 0; k < L; ++k) {
        const int l = L - 1 - k;
        const auto& blocks = up_[static_cast<std::size_t>(k)];
        for (std::size_t r = 0; r < blocks.size(); ++r) {
            h = run_block(g, blocks[r], h, temb_act, p);
            if (r == 0) h = add(g, h, res.features[static_cast<std::size_t>(l)]);
        }
        if (l > 0) h = conv(g, upsample_nearest(g, h, cfg_.rank), upsample_[static_cast<std::size_t>(k)], p);
    }
    res.out = conv(g, silu(g, group_norm(g, h, out_norm_, p)), head_, p);
    return res;
}

template UNetResult<float> UNet::forward<float>(Graph<float>&, const Var<float>&, std::span<const int>,
                                                const ParamView<float>&, std::span<const Var<float>>) const;
template UNetResult<double> UNet::forward<double>(Graph<double>&, const Var<double>&, std::span<const int>,
                                                  const ParamView<double>&, std::span<const Var<double>>) const;
template void UNet::check_input<float>(const Tensor<float>&) const;
template void UNet::check_input<double>(const Tensor<double>&) const;

}  // namespace scorefusion::nn
