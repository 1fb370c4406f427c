// Copyright 2026 The ScoreFusion Authors
// SPDX-License-Identifier: Apache-2.0

#include "scorefusion/net3d.hpp"

#include <algorithm>
#include <cmath>

#include "scorefusion/errors.hpp"

namespace scorefusion {
namespace {

// Linear interpolation weights for resizing n_in samples to n_out
// (half-pixel centres, edge clamped).
struct Lerp {
    int i0, i1;
    double f;
};

std::vector<Lerp> lerp_table(int n_in, int n_out) {
    std::vector<Lerp> t(static_cast<std::size_t>(n_out));
    const double scale = static_cast<double>(n_in) / n_out;
    for (int o = 0; o < n_out; ++o) {
        double src = (o + 0.5) * scale - 0.5;
        src = std::clamp(src, 0.0, static_cast<double>(n_in - 1));
        const int i0 = static_cast<int>(std::floor(src));
        const int i1 = std::min(i0 + 1, n_in - 1);
        t[static_cast<std::size_t>(o)] = {i0, i1, src - i0};
    }
    return t;
}

nn::Tensor<float> trilinear_resize(const nn::Tensor<float>& x, int d, int h, int w) {
    const auto td = lerp_table(x.d, d), th = lerp_table(x.h, h), tw = lerp_table(x.w, w);
    nn::Tensor<float> y(x.n, x.c, d, h, w);
    for (int b = 0; b < x.n; ++b)
        for (int c = 0; c < x.c; ++c) {
            const float* src = x.channel(b, c);
            float* dst = y.channel(b, c);
            auto at = [&](int i, int j, int k) {
                return static_cast<double>(src[(static_cast<std::size_t>(i) * x.h + j) * x.w + k]);
            };
            for (int i = 0; i < d; ++i)
                for (int j = 0; j < h; ++j)
                    for (int k = 0; k < w; ++k) {
                        const Lerp& a = td[static_cast<std::size_t>(i)];
                        const Lerp& bb = th[static_cast<std::size_t>(j)];
                        const Lerp& cc = tw[static_cast<std::size_t>(k)];
                        double v = 0.0;
                        for (int u = 0; u < 2; ++u)
                            for (int vv = 0; vv < 2; ++vv)
                                for (int q = 0; q < 2; ++q) {
                                    const double wgt = (u ? a.f : 1 - a.f) * (vv ? bb.f : 1 - bb.f) * (q ? cc.f : 1 - cc.f);
                                    if (wgt == 0.0) continue;
                                    v += wgt * at(u ? a.i1 : a.i0, vv ? bb.i1 : bb.i0, q ? cc.i1 : cc.i0);
                                }
                        dst[(static_cast<std::size_t>(i) * h + j) * w + k] = static_cast<float>(v);
                    }
        }
    return y;
}

// Mean over runs of `s` along dimension 1 (h) or 2 (w) of a (1, c, d, h, w) tensor.
nn::Tensor<float> pool_slice_axis(const nn::Tensor<float>& x, SliceAxis axis, int s) {
    const bool on_h = axis == SliceAxis::axis1;
    const int h = on_h ? x.h / s : x.h;
    const int w = on_h ? x.w : x.w / s;
    nn::Tensor<float> y(x.n, x.c, x.d, h, w);
    for (int b = 0; b < x.n; ++b)
        for (int c = 0; c < x.c; ++c) {
            const float* src = x.channel(b, c);
            float* dst = y.channel(b, c);
            for (int i = 0; i < x.d; ++i)
                for (int j = 0; j < h; ++j)
                    for (int k = 0; k < w; ++k) {
                        double acc = 0.0;
                        for (int r = 0; r < s; ++r) {
                            const int jj = on_h ? j * s + r : j;
                            const int kk = on_h ? k : k * s + r;
                            acc += src[(static_cast<std::size_t>(i) * x.h + jj) * x.w + kk];
                        }
                        dst[(static_cast<std::size_t>(i) * h + j) * w + k] = static_cast<float>(acc / s);
                    }
        }
    return y;
}

void check_fusion_inputs(const Net3D& net, const Volume& y_t, std::span<const Volume> x,
                         std::span<const BranchOutput* const> branches) {
    const auto& cfg = net.config();
    if (static_cast<int>(x.size()) != cfg.condition_channels) {
        throw ShapeError("fusion expects " + std::to_string(cfg.condition_channels) + " condition volumes, got " +
                         std::to_string(x.size()));
    }
    if (static_cast<int>(branches.size()) != cfg.branches) {
        throw ShapeError("fusion expects " + std::to_string(cfg.branches) + " branch scores, got " +
                         std::to_string(branches.size()));
    }
    for (const Volume& v : x) {
        if (v.dims() != y_t.dims()) throw ShapeError("condition dims " + to_string(v.dims()) + " differ from " + to_string(y_t.dims()));
    }
    for (const BranchOutput* b : branches) {
        if (b->eps_hat.dims() != y_t.dims()) {
            throw ShapeError("branch score dims " + to_string(b->eps_hat.dims()) + " differ from " + to_string(y_t.dims()));
        }
    }
}

template <class T>
struct FusionGraph {
    nn::Var<T> head;
    nn::Var<T> eps3d;
};

template <class T>
FusionGraph<T> run_fusion(nn::Graph<T>& g, const Net3D& net, const nn::ParamView<T>& p, const nn::Tensor<T>& input,
                          const nn::Tensor<T>& scores, std::span<const nn::Tensor<T>> pooled, int t) {
    const auto& cfg = net.config();
    std::vector<nn::Var<T>> inject;
    if (cfg.injects()) {
        if (static_cast<int>(pooled.size()) != cfg.levels()) {
            throw PyramidError("expected " + std::to_string(cfg.levels()) + " pooled feature levels, got " +
                               std::to_string(pooled.size()));
        }
        for (int l = 0; l < cfg.levels(); ++l) {
            inject.push_back(nn::conv(g, g.constant(pooled[static_cast<std::size_t>(l)]), net.align()[static_cast<std::size_t>(l)], p));
        }
    }
    const int ts[1] = {t};
    const auto res = net.unet().forward(g, g.constant(input), ts, p, std::span<const nn::Var<T>>(inject));
    return {res.out, fuse_scores(g, res.out, scores, cfg.lambda)};
}

template <class T>
nn::Tensor<T> scores_tensor(std::span<const BranchOutput* const> branches) {
    const Dims d = branches.front()->eps_hat.dims();
    nn::Tensor<T> s(1, static_cast<int>(branches.size()), static_cast<int>(d.d1), static_cast<int>(d.d2),
                    static_cast<int>(d.d3));
    for (std::size_t k = 0; k < branches.size(); ++k) {
        const auto& e = branches[k]->eps_hat.storage();
        std::copy(e.begin(), e.end(), s.channel(0, static_cast<int>(k)));
    }
    return s;
}

}  // namespace

Net3DVariant parse_net3d_variant(const std::string& s) {
    if (s == "full") return Net3DVariant::full;
    if (s == "small") return Net3DVariant::small;
    throw ConfigError("net3d.variant must be full or small, got '" + s + "'");
}

std::string to_string(Net3DVariant v) { return v == Net3DVariant::full ? "full" : "small"; }

void Net3DConfig::validate() const {
    if (branches < 2) throw ConfigError("net3d.branches must be at least 2");
    if (condition_channels < 1) throw ConfigError("net3d needs at least one condition channel");
    if (!std::isfinite(lambda)) throw ConfigError("net3d.lambda must be finite");
    if (injects() && branch_channels.size() < channels.size()) {
        throw ConfigError("feature injection needs one branch channel count per 3D level");
    }
}

nn::UNetConfig Net3DConfig::unet() const {
    nn::UNetConfig u;
    u.rank = 3;
    u.in_channels = in_channels();
    u.out_channels = out_channels();
    u.channels = channels;
    u.resblocks_per_level = resblocks_per_level;
    u.convs_per_resblock = convs_per_resblock;
    u.time_embed_dim = time_embed_dim;
    u.norm_groups = norm_groups;
    u.padding = padding;
    u.zero_output = zero_output;
    return u;
}

Net3DConfig Net3DConfig::reference(Net3DVariant v, int condition_channels, int branches) {
    Net3DConfig c;
    c.variant = v;
    c.condition_channels = condition_channels;
    c.branches = branches;
    if (v == Net3DVariant::small) {
        c.channels = {32, 64, 64, 128};
        c.time_embed_dim = 128;
        c.feature_injection = false;
    }
    return c;
}

Net3DConfig Net3DConfig::desk(Net3DVariant v, int condition_channels, const Net2DConfig& branch, int branches) {
    Net3DConfig c;
    c.variant = v;
    c.condition_channels = condition_channels;
    c.branches = branches;
    c.norm_groups = 4;
    c.branch_channels = branch.channels;
    if (v == Net3DVariant::small) {
        c.channels = {4, 8, 8, 16};
        c.time_embed_dim = 16;
        c.feature_injection = false;
    } else {
        c.channels = {8, 16, 16, 32};
        c.time_embed_dim = 32;
    }
    return c;
}

Net3D::Net3D(const Net3DConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
    cfg_.validate();
    unet_ = nn::UNet(cfg_.unet(), layout_, "");
    if (cfg_.injects()) {
        for (int l = 0; l < cfg_.levels(); ++l) {
            nn::ConvSpec s;
            s.in = cfg_.branches * cfg_.branch_channels[static_cast<std::size_t>(l)];
            s.out = cfg_.channels[static_cast<std::size_t>(l)];
            s.kernel = {1, 1, 1};
            s.weight = layout_.add("align." + std::to_string(l) + ".weight", {s.out, s.in, 1, 1, 1},
                                   nn::InitKind::fan_in_uniform, s.in);
            align_.push_back(s);
        }
    }
    params_ = layout_.initialize(seed);
}

Net3D build_net3d(const Net3DConfig& cfg, std::uint64_t seed) { return Net3D(cfg, seed); }

std::vector<nn::Tensor<float>> pool_pyramids(std::span<const BranchOutput* const> branches, const Dims& dims,
                                             int levels) {
    std::vector<nn::Tensor<float>> out;
    for (int l = 0; l < levels; ++l) {
        const int s = 1 << l;
        const int d = static_cast<int>(dims.d1) / s, h = static_cast<int>(dims.d2) / s, w = static_cast<int>(dims.d3) / s;
        std::vector<nn::Tensor<float>> parts;
        int channels = 0;
        for (const BranchOutput* b : branches) {
            if (static_cast<int>(b->pyramid.size()) <= l) {
                throw PyramidError("branch pyramid has " + std::to_string(b->pyramid.size()) + " levels, level " +
                                   std::to_string(l) + " missing");
            }
            const nn::Tensor<float>& f = b->pyramid[static_cast<std::size_t>(l)];
            const int along = b->axis == SliceAxis::axis1 ? f.h : f.w;
            nn::Tensor<float> pooled = along % s == 0 ? pool_slice_axis(f, b->axis, s) : f;
            if (pooled.d != d || pooled.h != h || pooled.w != w) pooled = trilinear_resize(pooled, d, h, w);
            channels += pooled.c;
            parts.push_back(std::move(pooled));
        }
        nn::Tensor<float> cat(1, channels, d, h, w);
        int off = 0;
        for (const auto& p : parts) {
            std::copy(p.data.begin(), p.data.end(), cat.channel(0, off));
            off += p.c;
        }
        out.push_back(std::move(cat));
    }
    return out;
}

std::vector<nn::Tensor<float>> align_features(const Net3D& net, std::span<const BranchOutput* const> branches,
                                              const Dims& dims) {
    const auto& cfg = net.config();
    if (!cfg.injects()) return {};
    const auto pooled = pool_pyramids(branches, dims, cfg.levels());
    nn::Graph<float> g(false);
    const nn::ParamView<float> p{net.params().data(), nullptr};
    std::vector<nn::Tensor<float>> out;
    for (int l = 0; l < cfg.levels(); ++l) {
        const auto& in = pooled[static_cast<std::size_t>(l)];
        if (in.c != net.align()[static_cast<std::size_t>(l)].in) {
            throw PyramidError("level " + std::to_string(l) + " carries " + std::to_string(in.c) + " channels, expected " +
                               std::to_string(net.align()[static_cast<std::size_t>(l)].in));
        }
        out.push_back(nn::conv(g, g.constant(in), net.align()[static_cast<std::size_t>(l)], p)->value);
    }
    return out;
}

template <class T>
nn::Tensor<T> fusion_input(const Volume& y_t, std::span<const Volume> x, std::span<const BranchOutput* const> branches) {
    const Dims d = y_t.dims();
    const int C = static_cast<int>(x.size()), K = static_cast<int>(branches.size());
    nn::Tensor<T> in(1, 1 + C + K, static_cast<int>(d.d1), static_cast<int>(d.d2), static_cast<int>(d.d3));
    auto put = [&](const Volume& v, int ch) { std::copy(v.storage().begin(), v.storage().end(), in.channel(0, ch)); };
    put(y_t, 0);
    for (int c = 0; c < C; ++c) put(x[static_cast<std::size_t>(c)], 1 + c);
    for (int k = 0; k < K; ++k) put(branches[static_cast<std::size_t>(k)]->eps_hat, 1 + C + k);
    return in;
}

template nn::Tensor<float> fusion_input<float>(const Volume&, std::span<const Volume>, std::span<const BranchOutput* const>);
template nn::Tensor<double> fusion_input<double>(const Volume&, std::span<const Volume>,
                                                 std::span<const BranchOutput* const>);

template <class T>
nn::Var<T> fuse_scores(nn::Graph<T>& g, const nn::Var<T>& head, const nn::Tensor<T>& scores, double lambda) {
    const nn::Tensor<T>& hv = head->value;
    const int K = scores.c;
    const int expected = K == 2 ? 2 : K + 1;
    if (hv.c != expected || hv.n != 1 || scores.n != 1 || hv.spatial() != scores.spatial()) {
        throw ShapeError("fusion head " + hv.shape_str() + " does not match scores " + scores.shape_str());
    }
    const std::size_t S = hv.spatial();
    const T lam = static_cast<T>(lambda);
    nn::Tensor<T> y(1, 1, hv.d, hv.h, hv.w);
    std::vector<T> probs;  // K x S softmax weights when K > 2
    if (K == 2) {
        const T* w = hv.channel(0, 0);
        const T* R = hv.channel(0, 1);
        const T* a = scores.channel(0, 0);
        const T* b = scores.channel(0, 1);
        for (std::size_t i = 0; i < S; ++i) y.data[i] = (T(0.5) + w[i]) * a[i] + (T(0.5) - w[i]) * b[i] + lam * R[i];
    } else {
        probs.assign(static_cast<std::size_t>(K) * S, T(0));
        const T* R = hv.channel(0, K);
        for (std::size_t i = 0; i < S; ++i) {
            T mx = hv.channel(0, 0)[i];
            for (int k = 1; k < K; ++k) mx = std::max(mx, hv.channel(0, k)[i]);
            T z = T(0);
            for (int k = 0; k < K; ++k) {
                const T e = std::exp(hv.channel(0, k)[i] - mx);
                probs[static_cast<std::size_t>(k) * S + i] = e;
                z += e;
            }
            T acc = T(0);
            for (int k = 0; k < K; ++k) {
                T& pk = probs[static_cast<std::size_t>(k) * S + i];
                pk /= z;
                acc += pk * scores.channel(0, k)[i];
            }
            y.data[i] = acc + lam * R[i];
        }
    }
    return g.make(std::move(y), head->requires_grad, [head, scores, lam, K, probs = std::move(probs)](nn::Node<T>& self) {
        nn::Tensor<T>& gh = head->grad_buffer();
        const std::size_t S = gh.spatial();
        const T* gy = self.grad.data.data();
        if (K == 2) {
            T* gw = gh.channel(0, 0);
            T* gR = gh.channel(0, 1);
            const T* a = scores.channel(0, 0);
            const T* b = scores.channel(0, 1);
            for (std::size_t i = 0; i < S; ++i) {
                gw[i] += gy[i] * (a[i] - b[i]);
                gR[i] += gy[i] * lam;
            }
            return;
        }
        T* gR = gh.channel(0, K);
        for (std::size_t i = 0; i < S; ++i) {
            T mix = T(0);
            for (int k = 0; k < K; ++k) mix += probs[static_cast<std::size_t>(k) * S + i] * scores.channel(0, k)[i];
            for (int k = 0; k < K; ++k) {
                const T pk = probs[static_cast<std::size_t>(k) * S + i];
                gh.channel(0, k)[i] += gy[i] * pk * (scores.channel(0, k)[i] - mix);
            }
            gR[i] += gy[i] * lam;
        }
    });
}

template nn::Var<float> fuse_scores<float>(nn::Graph<float>&, const nn::Var<float>&, const nn::Tensor<float>&, double);
template nn::Var<double> fuse_scores<double>(nn::Graph<double>&, const nn::Var<double>&, const nn::Tensor<double>&,
                                             double);

FusionOutput forward_3d(const Net3D& net, const Volume& y_t, std::span<const Volume> x,
                        std::span<const BranchOutput* const> branches, int t) {
    check_fusion_inputs(net, y_t, x, branches);
    const auto& cfg = net.config();
    const Dims d = y_t.dims();
    std::vector<nn::Tensor<float>> pooled;
    if (cfg.injects()) pooled = pool_pyramids(branches, d, cfg.levels());
    const nn::Tensor<float> scores = scores_tensor<float>(branches);

    nn::Graph<float> g(false);
    const nn::ParamView<float> p{net.params().data(), nullptr};
    const auto fg = run_fusion<float>(g, net, p, fusion_input<float>(y_t, x, branches), scores, pooled, t);

    FusionOutput out;
    const nn::Tensor<float>& head = fg.head->value;
    const std::size_t S = head.spatial();
    auto channel_volume = [&](int ch) {
        const float* src = head.channel(0, ch);
        return Volume(d, std::vector<float>(src, src + S));
    };
    out.eps3d = Volume(d, fg.eps3d->value.data);
    if (cfg.branches == 2) {
        out.w = channel_volume(0);
        out.R = channel_volume(1);
        Volume ca(d), cb(d);
        for (std::size_t i = 0; i < S; ++i) {
            ca[i] = 0.5f + out.w[i];
            cb[i] = 0.5f - out.w[i];
        }
        out.coefficients = {std::move(ca), std::move(cb)};
    } else {
        const int K = cfg.branches;
        out.R = channel_volume(K);
        for (int k = 0; k < K; ++k) out.coefficients.emplace_back(d);
        for (std::size_t i = 0; i < S; ++i) {
            double mx = head.channel(0, 0)[i];
            for (int k = 1; k < K; ++k) mx = std::max<double>(mx, head.channel(0, k)[i]);
            double z = 0.0;
            for (int k = 0; k < K; ++k) z += std::exp(head.channel(0, k)[i] - mx);
            for (int k = 0; k < K; ++k) {
                out.coefficients[static_cast<std::size_t>(k)][i] = static_cast<float>(std::exp(head.channel(0, k)[i] - mx) / z);
            }
        }
    }
    return out;
}

template <class T>
double loss_3d_generic(const Net3D& net, std::span<const T> params, std::span<T> grads, const nn::Tensor<T>& input,
                       const nn::Tensor<T>& scores, std::span<const nn::Tensor<T>> pooled, int t,
                       const nn::Tensor<T>& eps) {
    nn::Graph<T> g(true);
    const nn::ParamView<T> p{params.data(), grads.data()};
    const auto fg = run_fusion<T>(g, net, p, input, scores, pooled, t);
    const auto loss = nn::mse_loss(g, fg.eps3d, eps);
    g.backward(loss);
    return static_cast<double>(loss->value.data[0]);
}

template double loss_3d_generic<float>(const Net3D&, std::span<const float>, std::span<float>,
                                       const nn::Tensor<float>&, const nn::Tensor<float>&,
                                       std::span<const nn::Tensor<float>>, int, const nn::Tensor<float>&);
template double loss_3d_generic<double>(const Net3D&, std::span<const double>, std::span<double>,
                                        const nn::Tensor<double>&, const nn::Tensor<double>&,
                                        std::span<const nn::Tensor<double>>, int, const nn::Tensor<double>&);

LossResult loss_3d(const Net3D& net, const FusionBatch& batch, const NoiseSchedule& s) {
    if (batch.t < 1 || batch.t > s.steps()) throw RangeError("training timestep outside [1, T]");
    std::vector<const BranchOutput*> branches;
    for (const auto& b : batch.branches) branches.push_back(&b);
    const Volume y_t = q_sample(batch.y0, batch.t, batch.eps, s);
    check_fusion_inputs(net, y_t, batch.x, branches);
    std::vector<nn::Tensor<float>> pooled;
    if (net.config().injects()) pooled = pool_pyramids(branches, y_t.dims(), net.config().levels());
    const Dims d = y_t.dims();
    nn::Tensor<float> eps(1, 1, static_cast<int>(d.d1), static_cast<int>(d.d2), static_cast<int>(d.d3));
    eps.data = batch.eps.storage();

    LossResult r;
    r.grads.assign(net.parameter_count(), 0.f);
    r.loss = loss_3d_generic<float>(net, net.params(), r.grads, fusion_input<float>(y_t, batch.x, branches),
                                    scores_tensor<float>(branches), pooled, batch.t, eps);
    return r;
}

}  // namespace scorefusion
