// Copyright 2026 The ScoreFusion Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstddef>
#include <limits>
#include <span>
#include <vector>

#include "scorefusion/nn/graph.hpp"

namespace scorefusion::nn {

inline constexpr std::size_t kNoParam = std::numeric_limits<std::size_t>::max();

enum class Padding { zeros, circular };

/// Convolution over (d, h, w) with "same" padding k/2 per axis. Weights are
/// laid out [out][in][kd][kh][kw].
struct ConvSpec {
    int in = 0, out = 0;
    std::array<int, 3> kernel{1, 3, 3};
    std::array<int, 3> stride{1, 1, 1};
    Padding padding = Padding::zeros;
    std::size_t weight = kNoParam;
    std::size_t bias = kNoParam;

    int taps() const { return kernel[0] * kernel[1] * kernel[2]; }
    std::size_t weight_count() const { return static_cast<std::size_t>(out) * in * taps(); }
};

struct GroupNormSpec {
    int channels = 0;
    int groups = 1;
    std::size_t gamma = kNoParam;
    std::size_t beta = kNoParam;
    double eps = 1e-5;
};

/// Dense layer on (n, in, 1, 1, 1) tensors. Weights are [out][in].
struct LinearSpec {
    int in = 0, out = 0;
    std::size_t weight = kNoParam;
    std::size_t bias = kNoParam;
};

template <class T>
Var<T> conv(Graph<T>& g, const Var<T>& x, const ConvSpec& spec, const ParamView<T>& p);

template <class T>
Var<T> group_norm(Graph<T>& g, const Var<T>& x, const GroupNormSpec& spec, const ParamView<T>& p);

template <class T>
Var<T> silu(Graph<T>& g, const Var<T>& x);

template <class T>
Var<T> linear(Graph<T>& g, const Var<T>& x, const LinearSpec& spec, const ParamView<T>& p);

template <class T>
Var<T> add(Graph<T>& g, const Var<T>& a, const Var<T>& b);

/// x + v broadcast over space, v shaped (n, c, 1, 1, 1).
template <class T>
Var<T> add_channel_bias(Graph<T>& g, const Var<T>& x, const Var<T>& v);

/// Nearest-neighbour x2 upsampling of h, w (and d when `rank` is 3).
template <class T>
Var<T> upsample_nearest(Graph<T>& g, const Var<T>& x, int rank);

template <class T>
Var<T> concat_channels(Graph<T>& g, std::span<const Var<T>> parts);

template <class T>
Var<T> slice_channels(Graph<T>& g, const Var<T>& x, int first, int count);

/// mean((pred - target)^2) as a (1,1,1,1,1) scalar; target is a constant.
template <class T>
Var<T> mse_loss(Graph<T>& g, const Var<T>& pred, const Tensor<T>& target);

/// Sinusoidal timestep features, shape (t.size(), dim, 1, 1, 1).
template <class T>
Tensor<T> timestep_embedding(std::span<const int> t, int dim);

/// Output extent of a "same"-padded convolution along one axis.
constexpr int conv_out_extent(int in, int k, int s) { return (in + 2 * (k / 2) - k) / s + 1; }

}  // namespace scorefusion::nn
