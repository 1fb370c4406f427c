// Copyright 2026 The ScoreFusion Authors
// SPDX-License-Identifier: Apache-2.0

#include "scorefusion/nn/ops.hpp"

#include <Eigen/Core>
#include <cmath>
#include <stdexcept>
#include <string>

#include "scorefusion/errors.hpp"

namespace scorefusion::nn {
namespace {

template <class T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <class T>
using MapMat = Eigen::Map<RowMat<T>>;
template <class T>
using ConstMapMat = Eigen::Map<const RowMat<T>>;

struct ConvGeometry {
    int di, hi, wi;  // input extents
    int dout, hout, wout;
    std::size_t out_spatial() const { return static_cast<std::size_t>(dout) * hout * wout; }
};

template <class T>
ConvGeometry conv_geometry(const Tensor<T>& x, const ConvSpec& s) {
    if (x.c != s.in) {
        throw ShapeError("conv expects " + std::to_string(s.in) + " input channels, got " + std::to_string(x.c));
    }
    ConvGeometry g{x.d, x.h, x.w,
                   conv_out_extent(x.d, s.kernel[0], s.stride[0]),
                   conv_out_extent(x.h, s.kernel[1], s.stride[1]),
                   conv_out_extent(x.w, s.kernel[2], s.stride[2])};
    if (g.dout < 1 || g.hout < 1 || g.wout < 1) throw ShapeError("conv input too small: " + x.shape_str());
    return g;
}

inline int wrap(int i, int n) {
    i %= n;
    return i < 0 ? i + n : i;
}

// Fills rows [ci, kd, kh, kw] x columns [col0, col0 + out_spatial) of a
// row-major matrix with leading dimension ld.
template <class T>
void im2col(const T* x, const ConvGeometry& g, const ConvSpec& s, T* cols, std::size_t ld, std::size_t col0) {
    const int pd = s.kernel[0] / 2, ph = s.kernel[1] / 2, pw = s.kernel[2] / 2;
    const std::size_t in_sp = static_cast<std::size_t>(g.di) * g.hi * g.wi;
    const bool circ = s.padding == Padding::circular;
    std::size_t row = 0;
    for (int ci = 0; ci < s.in; ++ci) {
        const T* xc = x + ci * in_sp;
        for (int a = 0; a < s.kernel[0]; ++a)
            for (int b = 0; b < s.kernel[1]; ++b)
                for (int c = 0; c < s.kernel[2]; ++c, ++row) {
                    T* dst = cols + row * ld + col0;
                    for (int od = 0; od < g.dout; ++od) {
                        int id = od * s.stride[0] + a - pd;
                        const bool dok = id >= 0 && id < g.di;
                        if (circ) id = wrap(id, g.di);
                        for (int oh = 0; oh < g.hout; ++oh) {
                            int ih = oh * s.stride[1] + b - ph;
                            const bool hok = ih >= 0 && ih < g.hi;
                            if (circ) ih = wrap(ih, g.hi);
                            T* out_row = dst + (static_cast<std::size_t>(od) * g.hout + oh) * g.wout;
                            if (!circ && !(dok && hok)) {
                                for (int ow = 0; ow < g.wout; ++ow) out_row[ow] = T(0);
                                continue;
                            }
                            const T* in_row = xc + (static_cast<std::size_t>(id) * g.hi + ih) * g.wi;
                            for (int ow = 0; ow < g.wout; ++ow) {
                                int iw = ow * s.stride[2] + c - pw;
                                if (iw >= 0 && iw < g.wi) out_row[ow] = in_row[iw];
                                else out_row[ow] = circ ? in_row[wrap(iw, g.wi)] : T(0);
                            }
                        }
                    }
                }
    }
}

// Adjoint of im2col: accumulates column gradients back into x-shaped storage.
template <class T>
void col2im(const T* cols, std::size_t ld, std::size_t col0, const ConvGeometry& g, const ConvSpec& s, T* gx) {
    const int pd = s.kernel[0] / 2, ph = s.kernel[1] / 2, pw = s.kernel[2] / 2;
    const std::size_t in_sp = static_cast<std::size_t>(g.di) * g.hi * g.wi;
    const bool circ = s.padding == Padding::circular;
    std::size_t row = 0;
    for (int ci = 0; ci < s.in; ++ci) {
        T* gc = gx + ci * in_sp;
        for (int a = 0; a < s.kernel[0]; ++a)
            for (int b = 0; b < s.kernel[1]; ++b)
                for (int c = 0; c < s.kernel[2]; ++c, ++row) {
                    const T* src = cols + row * ld + col0;
                    for (int od = 0; od < g.dout; ++od) {
                        int id = od * s.stride[0] + a - pd;
                        if (!(id >= 0 && id < g.di)) {
                            if (!circ) continue;
                            id = wrap(id, g.di);
                        }
                        for (int oh = 0; oh < g.hout; ++oh) {
                            int ih = oh * s.stride[1] + b - ph;
                            if (!(ih >= 0 && ih < g.hi)) {
                                if (!circ) continue;
                                ih = wrap(ih, g.hi);
                            }
                            const T* in_row = src + (static_cast<std::size_t>(od) * g.hout + oh) * g.wout;
                            T* out_row = gc + (static_cast<std::size_t>(id) * g.hi + ih) * g.wi;
                            for (int ow = 0; ow < g.wout; ++ow) {
                                int iw = ow * s.stride[2] + c - pw;
                                if (iw >= 0 && iw < g.wi) out_row[iw] += in_row[ow];
                                else if (circ) out_row[wrap(iw, g.wi)] += in_row[ow];
                            }
                        }
                    }
                }
    }
}

template <class T>
bool is_pointwise(const ConvSpec& s) {
    return s.taps() == 1 && s.stride == std::array<int, 3>{1, 1, 1};
}

// Builds the [K x n*S] column matrix for the whole batch.
template <class T>
RowMat<T> batch_columns(const Tensor<T>& x, const ConvGeometry& g, const ConvSpec& s) {
    const std::size_t S = g.out_spatial();
    const std::size_t K = static_cast<std::size_t>(s.in) * s.taps();
    RowMat<T> cols(static_cast<Eigen::Index>(K), static_cast<Eigen::Index>(S * x.n));
    for (int b = 0; b < x.n; ++b) {
        im2col(x.data.data() + b * x.item_size(), g, s, cols.data(), S * x.n, b * S);
    }
    return cols;
}

}  // namespace

// ---------------------------------------------------------------------------

template <class T>
Var<T> conv(Graph<T>& g, const Var<T>& x, const ConvSpec& spec, const ParamView<T>& p) {
    const Tensor<T>& xv = x->value;
    const ConvGeometry geo = conv_geometry(xv, spec);
    const std::size_t S = geo.out_spatial();
    const auto NS = static_cast<Eigen::Index>(S * xv.n);
    const auto K = static_cast<Eigen::Index>(spec.in) * spec.taps();
    ConstMapMat<T> W(p.value(spec.weight), spec.out, K);

    Tensor<T> y(xv.n, spec.out, geo.dout, geo.hout, geo.wout);
    if (is_pointwise<T>(spec) && xv.n == 1) {
        ConstMapMat<T> X(xv.data.data(), K, NS);
        MapMat<T> Y(y.data.data(), spec.out, NS);
        Y.noalias() = W * X;
    } else {
        const RowMat<T> cols = batch_columns(xv, geo, spec);
        RowMat<T> out(spec.out, NS);
        out.noalias() = W * cols;
        for (int b = 0; b < xv.n; ++b)
            for (int co = 0; co < spec.out; ++co) {
                const T* src = out.data() + static_cast<std::size_t>(co) * NS + b * S;
                std::copy(src, src + S, y.channel(b, co));
            }
    }
    if (spec.bias != kNoParam) {
        const T* bias = p.value(spec.bias);
        for (int b = 0; b < xv.n; ++b)
            for (int co = 0; co < spec.out; ++co) {
                T* yc = y.channel(b, co);
                for (std::size_t s = 0; s < S; ++s) yc[s] += bias[co];
            }
    }

    const bool wants = x->requires_grad || p.trainable();
    return g.make(std::move(y), wants, [x, spec, p, geo](Node<T>& self) {
        const Tensor<T>& xv = x->value;
        const Tensor<T>& gy = self.grad;
        const std::size_t S = geo.out_spatial();
        const auto NS = static_cast<Eigen::Index>(S * xv.n);
        const auto K = static_cast<Eigen::Index>(spec.in) * spec.taps();
        ConstMapMat<T> W(p.value(spec.weight), spec.out, K);

        RowMat<T> G(spec.out, NS);
        for (int b = 0; b < xv.n; ++b)
            for (int co = 0; co < spec.out; ++co) {
                const T* src = gy.channel(b, co);
                std::copy(src, src + S, G.data() + static_cast<std::size_t>(co) * NS + b * S);
            }
        if (p.trainable()) {
            if (spec.bias != kNoParam) {
                T* gb = p.grad(spec.bias);
                for (int co = 0; co < spec.out; ++co) gb[co] += G.row(co).sum();
            }
            MapMat<T> gW(p.grad(spec.weight), spec.out, K);
            if (is_pointwise<T>(spec) && xv.n == 1) {
                ConstMapMat<T> X(xv.data.data(), K, NS);
                gW.noalias() += G * X.transpose();
            } else {
                const RowMat<T> cols = batch_columns(xv, geo, spec);
                gW.noalias() += G * cols.transpose();
            }
        }
        if (x->requires_grad) {
            Tensor<T>& gx = x->grad_buffer();
            RowMat<T> dcols(K, NS);
            dcols.noalias() = W.transpose() * G;
            for (int b = 0; b < xv.n; ++b) {
                col2im(dcols.data(), S * xv.n, b * S, geo, spec, gx.data.data() + b * xv.item_size());
            }
        }
    });
}

template <class T>
Var<T> group_norm(Graph<T>& g, const Var<T>& x, const GroupNormSpec& spec, const ParamView<T>& p) {
    const Tensor<T>& xv = x->value;
    if (xv.c != spec.channels || spec.channels % spec.groups != 0) {
        throw ShapeError("group_norm expects " + std::to_string(spec.channels) + " channels, got " + std::to_string(xv.c));
    }
    const int cpg = spec.channels / spec.groups;
    const std::size_t S = xv.spatial();
    const std::size_t count = static_cast<std::size_t>(cpg) * S;
    std::vector<T> mean(static_cast<std::size_t>(xv.n) * spec.groups), rstd(mean.size());
    Tensor<T> y(xv.n, xv.c, xv.d, xv.h, xv.w);
    const T* gamma = p.value(spec.gamma);
    const T* beta = p.value(spec.beta);
    for (int b = 0; b < xv.n; ++b)
        for (int gr = 0; gr < spec.groups; ++gr) {
            const T* base = xv.channel(b, gr * cpg);
            double s1 = 0.0;
            for (std::size_t i = 0; i < count; ++i) s1 += base[i];
            const double mu = s1 / static_cast<double>(count);
            double s2 = 0.0;
            for (std::size_t i = 0; i < count; ++i) {
                const double dv = base[i] - mu;
                s2 += dv * dv;
            }
            const double r = 1.0 / std::sqrt(s2 / static_cast<double>(count) + spec.eps);
            const std::size_t k = static_cast<std::size_t>(b) * spec.groups + gr;
            mean[k] = static_cast<T>(mu);
            rstd[k] = static_cast<T>(r);
            for (int cc = 0; cc < cpg; ++cc) {
                const int ch = gr * cpg + cc;
                const T* xc = xv.channel(b, ch);
                T* yc = y.channel(b, ch);
                for (std::size_t i = 0; i < S; ++i) yc[i] = (xc[i] - mean[k]) * rstd[k] * gamma[ch] + beta[ch];
            }
        }

    const bool wants = x->requires_grad || p.trainable();
    return g.make(std::move(y), wants, [x, spec, p, mean = std::move(mean), rstd = std::move(rstd)](Node<T>& self) {
        const Tensor<T>& xv = x->value;
        const Tensor<T>& gy = self.grad;
        const int cpg = spec.channels / spec.groups;
        const std::size_t S = xv.spatial();
        const double count = static_cast<double>(cpg) * static_cast<double>(S);
        const T* gamma = p.value(spec.gamma);
        T* ggamma = p.grad(spec.gamma);
        T* gbeta = p.grad(spec.beta);
        Tensor<T>* gx = x->requires_grad ? &x->grad_buffer() : nullptr;
        for (int b = 0; b < xv.n; ++b)
            for (int gr = 0; gr < spec.groups; ++gr) {
                const std::size_t k = static_cast<std::size_t>(b) * spec.groups + gr;
                const double mu = mean[k], r = rstd[k];
                double sum_g = 0.0, sum_gx = 0.0;  // over d(xhat)
                for (int cc = 0; cc < cpg; ++cc) {
                    const int ch = gr * cpg + cc;
                    const T* xc = xv.channel(b, ch);
                    const T* gc = gy.channel(b, ch);
                    double gg = 0.0, gbt = 0.0;
                    for (std::size_t i = 0; i < S; ++i) {
                        const double xh = (xc[i] - mu) * r;
                        gg += gc[i] * xh;
                        gbt += gc[i];
                        const double dxh = gc[i] * static_cast<double>(gamma[ch]);
                        sum_g += dxh;
                        sum_gx += dxh * xh;
                    }
                    if (ggamma) {
                        ggamma[ch] += static_cast<T>(gg);
                        gbeta[ch] += static_cast<T>(gbt);
                    }
                }
                if (!gx) continue;
                const double mg = sum_g / count, mgx = sum_gx / count;
                for (int cc = 0; cc < cpg; ++cc) {
                    const int ch = gr * cpg + cc;
                    const T* xc = xv.channel(b, ch);
                    const T* gc = gy.channel(b, ch);
                    T* dst = gx->channel(b, ch);
                    for (std::size_t i = 0; i < S; ++i) {
                        const double xh = (xc[i] - mu) * r;
                        const double dxh = gc[i] * static_cast<double>(gamma[ch]);
                        dst[i] += static_cast<T>(r * (dxh - mg - xh * mgx));
                    }
                }
            }
    });
}

template <class T>
Var<T> silu(Graph<T>& g, const Var<T>& x) {
    const Tensor<T>& xv = x->value;
    Tensor<T> y(xv.n, xv.c, xv.d, xv.h, xv.w);
    for (std::size_t i = 0; i < xv.size(); ++i) {
        const T v = xv.data[i];
        y.data[i] = v / (T(1) + std::exp(-v));
    }
    return g.make(std::move(y), x->requires_grad, [x](Node<T>& self) {
        const Tensor<T>& xv = x->value;
        Tensor<T>& gx = x->grad_buffer();
        for (std::size_t i = 0; i < xv.size(); ++i) {
            const T v = xv.data[i];
            const T s = T(1) / (T(1) + std::exp(-v));
            gx.data[i] += self.grad.data[i] * s * (T(1) + v * (T(1) - s));
        }
    });
}

template <class T>
Var<T> linear(Graph<T>& g, const Var<T>& x, const LinearSpec& spec, const ParamView<T>& p) {
    const Tensor<T>& xv = x->value;
    if (xv.item_size() != static_cast<std::size_t>(spec.in)) {
        throw ShapeError("linear expects " + std::to_string(spec.in) + " features, got " + std::to_string(xv.item_size()));
    }
    Tensor<T> y(xv.n, spec.out, 1, 1, 1);
    ConstMapMat<T> W(p.value(spec.weight), spec.out, spec.in);
    for (int b = 0; b < xv.n; ++b) {
        Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, 1>> xin(xv.data.data() + b * spec.in, spec.in);
        Eigen::Map<Eigen::Matrix<T, Eigen::Dynamic, 1>> yo(y.data.data() + b * spec.out, spec.out);
        yo.noalias() = W * xin;
        if (spec.bias != kNoParam) {
            yo += Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, 1>>(p.value(spec.bias), spec.out);
        }
    }
    const bool wants = x->requires_grad || p.trainable();
    return g.make(std::move(y), wants, [x, spec, p](Node<T>& self) {
        const Tensor<T>& xv = x->value;
        ConstMapMat<T> W(p.value(spec.weight), spec.out, spec.in);
        for (int b = 0; b < xv.n; ++b) {
            Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, 1>> xin(xv.data.data() + b * spec.in, spec.in);
            Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, 1>> gy(self.grad.data.data() + b * spec.out, spec.out);
            if (p.trainable()) {
                MapMat<T>(p.grad(spec.weight), spec.out, spec.in).noalias() += gy * xin.transpose();
                if (spec.bias != kNoParam) {
                    Eigen::Map<Eigen::Matrix<T, Eigen::Dynamic, 1>>(p.grad(spec.bias), spec.out) += gy;
                }
            }
            if (x->requires_grad) {
                Eigen::Map<Eigen::Matrix<T, Eigen::Dynamic, 1>> gx(x->grad_buffer().data.data() + b * spec.in, spec.in);
                gx.noalias() += W.transpose() * gy;
            }
        }
    });
}

template <class T>
Var<T> add(Graph<T>& g, const Var<T>& a, const Var<T>& b) {
    if (!a->value.same_shape(b->value)) {
        throw ShapeError("add shape mismatch " + a->value.shape_str() + " vs " + b->value.shape_str());
    }
    Tensor<T> y = a->value;
    for (std::size_t i = 0; i < y.size(); ++i) y.data[i] += b->value.data[i];
    return g.make(std::move(y), a->requires_grad || b->requires_grad, [a, b](Node<T>& self) {
        for (const auto* in : {&a, &b}) {
            if (!(*in)->requires_grad) continue;
            Tensor<T>& gi = (*in)->grad_buffer();
            for (std::size_t i = 0; i < gi.size(); ++i) gi.data[i] += self.grad.data[i];
        }
    });
}

template <class T>
Var<T> add_channel_bias(Graph<T>& g, const Var<T>& x, const Var<T>& v) {
    const Tensor<T>& xv = x->value;
    if (v->value.n != xv.n || v->value.item_size() != static_cast<std::size_t>(xv.c)) {
        throw ShapeError("channel bias shape " + v->value.shape_str() + " does not match " + xv.shape_str());
    }
    Tensor<T> y = xv;
    const std::size_t S = xv.spatial();
    for (int b = 0; b < xv.n; ++b)
        for (int ch = 0; ch < xv.c; ++ch) {
            const T add = v->value.data[static_cast<std::size_t>(b) * xv.c + ch];
            T* yc = y.channel(b, ch);
            for (std::size_t i = 0; i < S; ++i) yc[i] += add;
        }
    return g.make(std::move(y), x->requires_grad || v->requires_grad, [x, v](Node<T>& self) {
        const Tensor<T>& gy = self.grad;
        const std::size_t S = gy.spatial();
        if (x->requires_grad) {
            Tensor<T>& gx = x->grad_buffer();
            for (std::size_t i = 0; i < gx.size(); ++i) gx.data[i] += gy.data[i];
        }
        if (v->requires_grad) {
            Tensor<T>& gv = v->grad_buffer();
            for (int b = 0; b < gy.n; ++b)
                for (int ch = 0; ch < gy.c; ++ch) {
                    const T* gc = gy.channel(b, ch);
                    T s = T(0);
                    for (std::size_t i = 0; i < S; ++i) s += gc[i];
                    gv.data[static_cast<std::size_t>(b) * gy.c + ch] += s;
                }
        }
    });
}

template <class T>
Var<T> upsample_nearest(Graph<T>& g, const Var<T>& x, int rank) {
    const Tensor<T>& xv = x->value;
    const int fd = rank == 3 ? 2 : 1;
    Tensor<T> y(xv.n, xv.c, xv.d * fd, xv.h * 2, xv.w * 2);
    for (int b = 0; b < xv.n; ++b)
        for (int ch = 0; ch < xv.c; ++ch) {
            const T* src = xv.channel(b, ch);
            T* dst = y.channel(b, ch);
            for (int z = 0; z < y.d; ++z)
                for (int r = 0; r < y.h; ++r)
                    for (int c = 0; c < y.w; ++c) {
                        dst[(static_cast<std::size_t>(z) * y.h + r) * y.w + c] =
                            src[(static_cast<std::size_t>(z / fd) * xv.h + r / 2) * xv.w + c / 2];
                    }
        }
    return g.make(std::move(y), x->requires_grad, [x, fd](Node<T>& self) {
        const Tensor<T>& xv = x->value;
        const Tensor<T>& gy = self.grad;
        Tensor<T>& gx = x->grad_buffer();
        for (int b = 0; b < xv.n; ++b)
            for (int ch = 0; ch < xv.c; ++ch) {
                const T* src = gy.channel(b, ch);
                T* dst = gx.channel(b, ch);
                for (int z = 0; z < gy.d; ++z)
                    for (int r = 0; r < gy.h; ++r)
                        for (int c = 0; c < gy.w; ++c) {
                            dst[(static_cast<std::size_t>(z / fd) * xv.h + r / 2) * xv.w + c / 2] +=
                                src[(static_cast<std::size_t>(z) * gy.h + r) * gy.w + c];
                        }
            }
    });
}

template <class T>
Var<T> concat_channels(Graph<T>& g, std::span<const Var<T>> parts) {
    if (parts.empty()) throw ShapeError("concat of zero tensors");
    const Tensor<T>& f = parts.front()->value;
    int channels = 0;
    bool wants = false;
    for (const auto& p : parts) {
        const Tensor<T>& v = p->value;
        if (v.n != f.n || v.d != f.d || v.h != f.h || v.w != f.w) {
            throw ShapeError("concat shape mismatch " + v.shape_str() + " vs " + f.shape_str());
        }
        channels += v.c;
        wants = wants || p->requires_grad;
    }
    Tensor<T> y(f.n, channels, f.d, f.h, f.w);
    for (int b = 0; b < f.n; ++b) {
        int off = 0;
        for (const auto& p : parts) {
            const Tensor<T>& v = p->value;
            std::copy(v.channel(b, 0), v.channel(b, 0) + v.item_size(), y.channel(b, off));
            off += v.c;
        }
    }
    std::vector<Var<T>> keep(parts.begin(), parts.end());
    return g.make(std::move(y), wants, [keep](Node<T>& self) {
        const Tensor<T>& gy = self.grad;
        for (int b = 0; b < gy.n; ++b) {
            int off = 0;
            for (const auto& p : keep) {
                const int c = p->value.c;
                if (p->requires_grad) {
                    Tensor<T>& gp = p->grad_buffer();
                    const T* src = gy.channel(b, off);
                    T* dst = gp.channel(b, 0);
                    for (std::size_t i = 0; i < gp.item_size(); ++i) dst[i] += src[i];
                }
                off += c;
            }
        }
    });
}

template <class T>
Var<T> slice_channels(Graph<T>& g, const Var<T>& x, int first, int count) {
    const Tensor<T>& xv = x->value;
    if (first < 0 || count < 1 || first + count > xv.c) throw ShapeError("slice_channels out of range");
    Tensor<T> y(xv.n, count, xv.d, xv.h, xv.w);
    for (int b = 0; b < xv.n; ++b) std::copy(xv.channel(b, first), xv.channel(b, first) + y.item_size(), y.channel(b, 0));
    return g.make(std::move(y), x->requires_grad, [x, first](Node<T>& self) {
        const Tensor<T>& gy = self.grad;
        Tensor<T>& gx = x->grad_buffer();
        for (int b = 0; b < gy.n; ++b) {
            const T* src = gy.channel(b, 0);
            T* dst = gx.channel(b, first);
            for (std::size_t i = 0; i < gy.item_size(); ++i) dst[i] += src[i];
        }
    });
}

template <class T>
Var<T> mse_loss(Graph<T>& g, const Var<T>& pred, const Tensor<T>& target) {
    const Tensor<T>& pv = pred->value;
    if (!pv.same_shape(target)) throw ShapeError("mse shape mismatch " + pv.shape_str() + " vs " + target.shape_str());
    double acc = 0.0;
    for (std::size_t i = 0; i < pv.size(); ++i) {
        const double d = static_cast<double>(pv.data[i]) - target.data[i];
        acc += d * d;
    }
    Tensor<T> y(1, 1, 1, 1, 1);
    y.data[0] = static_cast<T>(acc / static_cast<double>(pv.size()));
    return g.make(std::move(y), pred->requires_grad, [pred, target](Node<T>& self) {
        const Tensor<T>& pv = pred->value;
        Tensor<T>& gp = pred->grad_buffer();
        const T scale = self.grad.data[0] * T(2) / static_cast<T>(pv.size());
        for (std::size_t i = 0; i < pv.size(); ++i) gp.data[i] += scale * (pv.data[i] - target.data[i]);
    });
}

template <class T>
Tensor<T> timestep_embedding(std::span<const int> t, int dim) {
    Tensor<T> out(static_cast<int>(t.size()), dim, 1, 1, 1);
    const int half = dim / 2;
    for (std::size_t b = 0; b < t.size(); ++b) {
        for (int i = 0; i < half; ++i) {
            const double freq = std::exp(-std::log(10000.0) * i / std::max(half, 1));
            const double arg = t[b] * freq;
            out.data[b * dim + i] = static_cast<T>(std::sin(arg));
            out.data[b * dim + half + i] = static_cast<T>(std::cos(arg));
        }
    }
    return out;
}

#define SCOREFUSION_INSTANTIATE_OPS(T)                                                                    \
    template Var<T> conv<T>(Graph<T>&, const Var<T>&, const ConvSpec&, const ParamView<T>&);             \
    template Var<T> group_norm<T>(Graph<T>&, const Var<T>&, const GroupNormSpec&, const ParamView<T>&);  \
    template Var<T> silu<T>(Graph<T>&, const Var<T>&);                                                   \
    template Var<T> linear<T>(Graph<T>&, const Var<T>&, const LinearSpec&, const ParamView<T>&);         \
    template Var<T> add<T>(Graph<T>&, const Var<T>&, const Var<T>&);                                     \
    template Var<T> add_channel_bias<T>(Graph<T>&, const Var<T>&, const Var<T>&);                        \
    template Var<T> upsample_nearest<T>(Graph<T>&, const Var<T>&, int);                                  \
    template Var<T> concat_channels<T>(Graph<T>&, std::span<const Var<T>>);                              \
    template Var<T> slice_channels<T>(Graph<T>&, const Var<T>&, int, int);                               \
    template Var<T> mse_loss<T>(Graph<T>&, const Var<T>&, const Tensor<T>&);                             \
    template Tensor<T> timestep_embedding<T>(std::span<const int>, int);

SCOREFUSION_INSTANTIATE_OPS(float)
SCOREFUSION_INSTANTIATE_OPS(double)

#undef SCOREFUSION_INSTANTIATE_OPS

}  // namespace scorefusion::nn
