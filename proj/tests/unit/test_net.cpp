// Copyright 2026 The ScoreFusion Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest/doctest.h>

#include <cmath>
#include <vector>

#include "gradcheck.hpp"
#include "scorefusion/errors.hpp"
#include "scorefusion/net2d.hpp"
#include "scorefusion/net3d.hpp"
#include "scorefusion/rng.hpp"

using namespace scorefusion;

namespace {

Net2DConfig micro2d() {
    Net2DConfig c = Net2DConfig::desk(1);
    c.channels = {4, 8};
    c.time_embed_dim = 8;
    c.norm_groups = 2;
    return c;
}

Net3DConfig micro3d(const Net2DConfig& b) {
    Net3DConfig c = Net3DConfig::desk(Net3DVariant::full, 1, b);
    c.channels = {4, 8};
    c.time_embed_dim = 8;
    c.norm_groups = 2;
    c.zero_output = false;
    return c;
}

template <class T>
nn::Tensor<T> random_tensor(int n, int c, int d, int h, int w, Rng& rng) {
    nn::Tensor<T> t(n, c, d, h, w);
    for (auto& v : t.data) v = static_cast<T>(rng.normal());
    return t;
}

Volume random_volume(Dims d, Rng& rng) {
    Volume v(d);
    for (auto& x : v.storage()) x = static_cast<float>(rng.normal());
    return v;
}

std::vector<double> to_double(const std::vector<float>& v) { return {v.begin(), v.end()}; }

}  // namespace

TEST_CASE("net2d gradients agree with central differences") {
    const Net2D net(micro2d(), 11);
    const NoiseSchedule s = make_linear_schedule();
    Rng rng(5);
    const auto y0 = random_tensor<double>(2, 1, 1, 8, 8, rng);
    const auto x = random_tensor<double>(2, 1, 1, 8, 8, rng);
    const auto eps = random_tensor<double>(2, 1, 1, 8, 8, rng);
    const std::vector<int> t{37, 640};
    const auto res = testing::gradient_check(
        to_double(net.params()),
        [&](std::span<const double> p, std::span<double> g) {
            return loss_2d_generic<double>(net.unet(), p, g, y0, x, t, eps, s);
        },
        120, 99);
    CHECK(res.probed == 120);
    CHECK(res.max_rel_error < 1e-3);
}

TEST_CASE("net3d gradients agree with central differences") {
    const Net2DConfig bc = micro2d();
    const Net3D net(micro3d(bc), 12);
    Rng rng(6);
    const Dims d{4, 4, 4};
    BranchOutput a, b;
    a.axis = SliceAxis::axis1;
    b.axis = SliceAxis::axis2;
    a.eps_hat = random_volume(d, rng);
    b.eps_hat = random_volume(d, rng);
    a.pyramid = {random_tensor<float>(1, 4, 4, 4, 4, rng), random_tensor<float>(1, 8, 2, 4, 2, rng)};
    b.pyramid = {random_tensor<float>(1, 4, 4, 4, 4, rng), random_tensor<float>(1, 8, 2, 2, 4, rng)};
    const BranchOutput* br[2] = {&a, &b};
    const Volume y_t = random_volume(d, rng);
    const std::vector<Volume> x{random_volume(d, rng)};
    std::vector<nn::Tensor<double>> pooled;
    for (const auto& p : pool_pyramids(br, d, 2)) pooled.push_back(p.cast<double>());
    const auto input = fusion_input<double>(y_t, x, br);
    nn::Tensor<double> scores(1, 2, 4, 4, 4);
    for (std::size_t i = 0; i < d.count(); ++i) {
        scores.data[i] = a.eps_hat[i];
        scores.data[d.count() + i] = b.eps_hat[i];
    }
    const auto eps = random_tensor<double>(1, 1, 4, 4, 4, rng);
    const auto res = testing::gradient_check(
        to_double(net.params()),
        [&](std::span<const double> p, std::span<double> g) {
            return loss_3d_generic<double>(net, p, g, input, scores, pooled, 420, eps);
        },
        120, 77);
    CHECK(res.max_rel_error < 1e-3);
}

TEST_CASE("fresh fusion network averages its branches") {
    const Net2DConfig bc = micro2d();
    Net3DConfig c = micro3d(bc);
    c.zero_output = true;
    const Net3D net(c, 3);
    Rng rng(8);
    const Dims d{4, 4, 4};
    BranchOutput a, b;
    a.axis = SliceAxis::axis1;
    b.axis = SliceAxis::axis2;
    a.eps_hat = random_volume(d, rng);
    b.eps_hat = random_volume(d, rng);
    a.pyramid = {random_tensor<float>(1, 4, 4, 4, 4, rng), random_tensor<float>(1, 8, 2, 4, 2, rng)};
    b.pyramid = {random_tensor<float>(1, 4, 4, 4, 4, rng), random_tensor<float>(1, 8, 2, 2, 4, rng)};
    const BranchOutput* br[2] = {&a, &b};
    const std::vector<Volume> x{random_volume(d, rng)};
    const FusionOutput f = forward_3d(net, random_volume(d, rng), x, br, 500);
    for (std::size_t i = 0; i < d.count(); ++i) {
        CHECK(f.w[i] == 0.f);
        CHECK(f.R[i] == 0.f);
        CHECK(f.eps3d[i] == doctest::Approx(0.5 * (a.eps_hat[i] + b.eps_hat[i])).epsilon(1e-6));
    }
}
