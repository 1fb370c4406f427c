// Copyright 2026 The ScoreFusion Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace scorefusion::nn {

/// Dense NCDHW tensor. 2D feature maps use d == 1.
template <class T>
struct Tensor {
    int n = 0, c = 0, d = 0, h = 0, w = 0;
    std::vector<T> data;

    Tensor() = default;
    Tensor(int n_, int c_, int d_, int h_, int w_, T fill = T(0))
        : n(n_), c(c_), d(d_), h(h_), w(w_),
          data(static_cast<std::size_t>(n_) * c_ * d_ * h_ * w_, fill) {}

    std::size_t spatial() const { return static_cast<std::size_t>(d) * h * w; }
    std::size_t item_size() const { return static_cast<std::size_t>(c) * spatial(); }
    std::size_t size() const { return data.size(); }
    bool empty() const { return data.empty(); }

    bool same_shape(const Tensor& o) const { return n == o.n && c == o.c && d == o.d && h == o.h && w == o.w; }

    T* channel(int b, int ch) { return data.data() + (static_cast<std::size_t>(b) * c + ch) * spatial(); }
    const T* channel(int b, int ch) const { return data.data() + (static_cast<std::size_t>(b) * c + ch) * spatial(); }

    std::string shape_str() const {
        return "(" + std::to_string(n) + "," + std::to_string(c) + "," + std::to_string(d) + "," + std::to_string(h) +
               "," + std::to_string(w) + ")";
    }

    template <class U>
    Tensor<U> cast() const {
        Tensor<U> out(n, c, d, h, w);
        for (std::size_t i = 0; i < data.size(); ++i) out.data[i] = static_cast<U>(data[i]);
        return out;
    }
};

}  // namespace scorefusion::nn
