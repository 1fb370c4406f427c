// Copyright 2026 The ScoreFusion Authors
// SPDX-License-Identifier: Apache-2.0

#include "scorefusion/net2d.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <thread>

#include "scorefusion/errors.hpp"

namespace scorefusion {
namespace {

constexpr std::size_t kSliceChunk = 16;

struct SliceGeometry {
    std::size_t count, rows, cols;
};

SliceGeometry slice_geometry(const Dims& d, SliceAxis axis) {
    return axis == SliceAxis::axis1 ? SliceGeometry{d.d2, d.d1, d.d3} : SliceGeometry{d.d3, d.d1, d.d2};
}

// Volume index of slice s, in-plane (r, c).
std::size_t volume_index(const Volume& v, SliceAxis axis, std::size_t s, std::size_t r, std::size_t c) {
    return axis == SliceAxis::axis1 ? v.index(r, s, c) : v.index(r, c, s);
}

nn::Tensor<float> cat_input(const nn::Tensor<float>& y_t, const nn::Tensor<float>& x) {
    if (y_t.c != 1 || x.n != y_t.n || x.d != y_t.d || x.h != y_t.h || x.w != y_t.w) {
        throw ShapeError("slice input " + y_t.shape_str() + " and condition " + x.shape_str() + " do not pair");
    }
    nn::Tensor<float> in(y_t.n, 1 + x.c, y_t.d, y_t.h, y_t.w);
    for (int b = 0; b < y_t.n; ++b) {
        std::copy(y_t.channel(b, 0), y_t.channel(b, 0) + y_t.item_size(), in.channel(b, 0));
        std::copy(x.channel(b, 0), x.channel(b, 0) + x.item_size(), in.channel(b, 1));
    }
    return in;
}

template <class T>
nn::Tensor<T> cat_input_t(const nn::Tensor<T>& y_t, const nn::Tensor<T>& x) {
    nn::Tensor<T> in(y_t.n, 1 + x.c, y_t.d, y_t.h, y_t.w);
    for (int b = 0; b < y_t.n; ++b) {
        std::copy(y_t.channel(b, 0), y_t.channel(b, 0) + y_t.item_size(), in.channel(b, 0));
        std::copy(x.channel(b, 0), x.channel(b, 0) + x.item_size(), in.channel(b, 1));
    }
    return in;
}

}  // namespace

nn::UNetConfig Net2DConfig::unet() const {
    nn::UNetConfig u;
    u.rank = 2;
    u.in_channels = in_channels();
    u.out_channels = 1;
    u.channels = channels;
    u.resblocks_per_level = resblocks_per_level;
    u.convs_per_resblock = convs_per_resblock;
    u.time_embed_dim = time_embed_dim;
    u.norm_groups = norm_groups;
    u.padding = padding;
    u.zero_output = zero_output;
    return u;
}

Net2DConfig Net2DConfig::reference(int condition_channels) {
    Net2DConfig c;
    c.condition_channels = condition_channels;
    return c;
}

Net2DConfig Net2DConfig::desk(int condition_channels) {
    Net2DConfig c;
    c.condition_channels = condition_channels;
    c.channels = {8, 16, 16, 32};
    c.time_embed_dim = 32;
    c.norm_groups = 4;
    return c;
}

Net2D::Net2D(const Net2DConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
    if (cfg.condition_channels < 1) throw ConfigError("net2d needs at least one condition channel");
    unet_ = nn::UNet(cfg.unet(), layout_, "");
    params_ = layout_.initialize(seed);
}

Net2D build_net2d(const Net2DConfig& cfg, std::uint64_t seed) { return Net2D(cfg, seed); }

SliceOutput forward_2d(const Net2D& net, const nn::Tensor<float>& y_t, const nn::Tensor<float>& x,
                       std::span<const int> t) {
    nn::Graph<float> g(false);
    const nn::ParamView<float> p{net.params().data(), nullptr};
    const auto res = net.unet().forward(g, g.constant(cat_input(y_t, x)), t, p);
    SliceOutput out;
    out.eps = std::move(res.out->value);
    for (const auto& f : res.features) out.features.push_back(f->value);
    return out;
}

template <class T>
nn::Tensor<T> slices_to_tensor(std::span<const Volume> volumes, SliceAxis axis, std::size_t first, std::size_t count) {
    if (volumes.empty()) throw ShapeError("no volumes to slice");
    const Dims d = volumes.front().dims();
    const SliceGeometry geo = slice_geometry(d, axis);
    if (first + count > geo.count) throw ShapeError("slice range exceeds the slice axis extent");
    nn::Tensor<T> out(static_cast<int>(count), static_cast<int>(volumes.size()), 1, static_cast<int>(geo.rows),
                      static_cast<int>(geo.cols));
    for (std::size_t ch = 0; ch < volumes.size(); ++ch) {
        const Volume& v = volumes[ch];
        if (v.dims() != d) throw ShapeError("condition dims " + to_string(v.dims()) + " differ from " + to_string(d));
        for (std::size_t s = 0; s < count; ++s) {
            T* dst = out.channel(static_cast<int>(s), static_cast<int>(ch));
            for (std::size_t r = 0; r < geo.rows; ++r)
                for (std::size_t c = 0; c < geo.cols; ++c) dst[r * geo.cols + c] = v[volume_index(v, axis, first + s, r, c)];
        }
    }
    return out;
}

template nn::Tensor<float> slices_to_tensor<float>(std::span<const Volume>, SliceAxis, std::size_t, std::size_t);
template nn::Tensor<double> slices_to_tensor<double>(std::span<const Volume>, SliceAxis, std::size_t, std::size_t);

BranchOutput branch_forward(const Net2D& net, SliceAxis axis, const Volume& y_t, std::span<const Volume> x, int t,
                            int workers, bool keep_pyramid) {
    if (static_cast<int>(x.size()) != net.config().condition_channels) {
        throw ShapeError("branch expects " + std::to_string(net.config().condition_channels) + " condition volumes, got " +
                         std::to_string(x.size()));
    }
    for (const Volume& v : x) {
        if (v.dims() != y_t.dims()) throw ShapeError("condition dims " + to_string(v.dims()) + " differ from " + to_string(y_t.dims()));
    }
    const Dims d = y_t.dims();
    const SliceGeometry geo = slice_geometry(d, axis);
    const int L = net.config().levels();

    BranchOutput out;
    out.axis = axis;
    out.eps_hat = Volume(d);
    if (keep_pyramid) {
        for (int l = 0; l < L; ++l) {
            const int s = 1 << l;
            const int c = net.config().channels[static_cast<std::size_t>(l)];
            const int e1 = static_cast<int>(d.d1) / s;
            if (axis == SliceAxis::axis1) {
                out.pyramid.emplace_back(1, c, e1, static_cast<int>(d.d2), static_cast<int>(d.d3) / s);
            } else {
                out.pyramid.emplace_back(1, c, e1, static_cast<int>(d.d2) / s, static_cast<int>(d.d3));
            }
        }
    }

    const std::size_t chunks = (geo.count + kSliceChunk - 1) / kSliceChunk;
    auto run_chunk = [&](std::size_t k) {
        const std::size_t first = k * kSliceChunk;
        const std::size_t count = std::min(kSliceChunk, geo.count - first);
        const nn::Tensor<float> yt = slices_to_tensor<float>(std::span<const Volume>(&y_t, 1), axis, first, count);
        const nn::Tensor<float> xc = slices_to_tensor<float>(x, axis, first, count);
        const std::vector<int> ts(count, t);
        const SliceOutput so = forward_2d(net, yt, xc, ts);
        for (std::size_t s = 0; s < count; ++s) {
            const float* e = so.eps.channel(static_cast<int>(s), 0);
            for (std::size_t r = 0; r < geo.rows; ++r)
                for (std::size_t c = 0; c < geo.cols; ++c) {
                    out.eps_hat[volume_index(out.eps_hat, axis, first + s, r, c)] = e[r * geo.cols + c];
                }
        }
        if (!keep_pyramid) return;
        for (int l = 0; l < L; ++l) {
            const nn::Tensor<float>& f = so.features[static_cast<std::size_t>(l)];
            nn::Tensor<float>& pyr = out.pyramid[static_cast<std::size_t>(l)];
            for (std::size_t s = 0; s < count; ++s) {
                const std::size_t slice = first + s;
                for (int ch = 0; ch < f.c; ++ch) {
                    const float* src = f.channel(static_cast<int>(s), ch);
                    float* dst = pyr.channel(0, ch);
                    for (int r = 0; r < f.h; ++r)
                        for (int c = 0; c < f.w; ++c) {
                            const std::size_t idx =
                                axis == SliceAxis::axis1
                                    ? (static_cast<std::size_t>(r) * pyr.h + slice) * pyr.w + static_cast<std::size_t>(c)
                                    : (static_cast<std::size_t>(r) * pyr.h + static_cast<std::size_t>(c)) * pyr.w + slice;
                            dst[idx] = src[static_cast<std::size_t>(r) * f.w + c];
                        }
                }
            }
        }
    };

    const std::size_t nthreads = std::min<std::size_t>(std::max(workers, 1), chunks);
    if (nthreads <= 1) {
        for (std::size_t k = 0; k < chunks; ++k) run_chunk(k);
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::exception_ptr> errors(nthreads);
        std::vector<std::thread> pool;
        for (std::size_t w = 0; w < nthreads; ++w) {
            pool.emplace_back([&, w] {
                try {
                    for (std::size_t k = next++; k < chunks; k = next++) run_chunk(k);
                } catch (...) {
                    errors[w] = std::current_exception();
                }
            });
        }
        for (auto& th : pool) th.join();
        for (const auto& e : errors) {
            if (e) std::rethrow_exception(e);
        }
    }
    return out;
}

template <class T>
double loss_2d_generic(const nn::UNet& unet, std::span<const T> params, std::span<T> grads, const nn::Tensor<T>& y0,
                       const nn::Tensor<T>& x, std::span<const int> t, const nn::Tensor<T>& eps,
                       const NoiseSchedule& s) {
    if (!y0.same_shape(eps)) throw ShapeError("noise shape " + eps.shape_str() + " differs from " + y0.shape_str());
    if (static_cast<int>(t.size()) != y0.n) throw ShapeError("batch axis: one timestep per slice required");
    nn::Tensor<T> y_t(y0.n, y0.c, y0.d, y0.h, y0.w);
    for (int b = 0; b < y0.n; ++b) {
        if (t[static_cast<std::size_t>(b)] < 1 || t[static_cast<std::size_t>(b)] > s.steps()) {
            throw RangeError("training timestep outside [1, T]");
        }
        const double ab = s.alpha_bar(t[static_cast<std::size_t>(b)]);
        const T ca = static_cast<T>(std::sqrt(ab)), cb = static_cast<T>(std::sqrt(1.0 - ab));
        for (std::size_t i = 0; i < y0.item_size(); ++i) {
            const std::size_t k = b * y0.item_size() + i;
            y_t.data[k] = ca * y0.data[k] + cb * eps.data[k];
        }
    }
    nn::Graph<T> g(true);
    const nn::ParamView<T> p{params.data(), grads.data()};
    const auto res = unet.forward(g, g.constant(cat_input_t(y_t, x)), t, p);
    const auto loss = nn::mse_loss(g, res.out, eps);
    g.backward(loss);
    return static_cast<double>(loss->value.data[0]);
}

template double loss_2d_generic<float>(const nn::UNet&, std::span<const float>, std::span<float>,
                                       const nn::Tensor<float>&, const nn::Tensor<float>&, std::span<const int>,
                                       const nn::Tensor<float>&, const NoiseSchedule&);
template double loss_2d_generic<double>(const nn::UNet&, std::span<const double>, std::span<double>,
                                        const nn::Tensor<double>&, const nn::Tensor<double>&, std::span<const int>,
                                        const nn::Tensor<double>&, const NoiseSchedule&);

LossResult loss_2d(const Net2D& net, const nn::Tensor<float>& y0, const nn::Tensor<float>& x, std::span<const int> t,
                   const nn::Tensor<float>& eps, const NoiseSchedule& s) {
    LossResult r;
    r.grads.assign(net.parameter_count(), 0.f);
    r.loss = loss_2d_generic<float>(net.unet(), net.params(), r.grads, y0, x, t, eps, s);
    return r;
}

}  // namespace scorefusion
