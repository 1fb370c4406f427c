// Copyright 2026 The ScoreFusion Authors
// SPDX-License-Identifier: Apache-2.0

#include <benchmark/benchmark.h>

#include <vector>

#include "scorefusion/degrade.hpp"
#include "scorefusion/metrics.hpp"
#include "scorefusion/net2d.hpp"
#include "scorefusion/net3d.hpp"
#include "scorefusion/rng.hpp"

using namespace scorefusion;

namespace {

Volume noise(std::size_t n, std::uint64_t seed) {
    Rng rng(seed);
    Volume v(Dims{n, n, n});
    for (auto& x : v.storage()) x = static_cast<float>(rng.normal());
    return v;
}

void BM_BranchForward(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    const Net2D net(Net2DConfig::desk(1), 1);
    const Volume y = noise(n, 2);
    const std::vector<Volume> x{noise(n, 3)};
    for (auto _ : state) benchmark::DoNotOptimize(branch_forward(net, SliceAxis::axis1, y, x, 500, 1, false));
}
BENCHMARK(BM_BranchForward)->Arg(16)->Unit(benchmark::kMillisecond);

void BM_FusionForward(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    const Net2D net(Net2DConfig::desk(1), 1);
    const Net3D fusion(Net3DConfig::desk(Net3DVariant::full, 1, Net2DConfig::desk(1)), 4);
    const Volume y = noise(n, 2);
    const std::vector<Volume> x{noise(n, 3)};
    const BranchOutput a = branch_forward(net, SliceAxis::axis1, y, x, 500, 1, true);
    const BranchOutput b = branch_forward(net, SliceAxis::axis2, y, x, 500, 1, true);
    const BranchOutput* br[2] = {&a, &b};
    for (auto _ : state) benchmark::DoNotOptimize(forward_3d(fusion, y, x, br, 500));
}
BENCHMARK(BM_FusionForward)->Arg(16)->Unit(benchmark::kMillisecond);

void BM_ProjectConsistency(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    const auto op = DegradationOperator::avg_pool(4);
    const Volume y = noise(n, 5);
    const Volume x = apply(op, noise(n, 6));
    for (auto _ : state) benchmark::DoNotOptimize(project_consistency(op, y, x));
}
BENCHMARK(BM_ProjectConsistency)->Arg(16)->Arg(32);

void BM_Ssim3d(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    Volume a = noise(n, 7), b = noise(n, 8);
    for (auto& v : a.storage()) v = 0.5f + 0.1f * v;
    for (auto& v : b.storage()) v = 0.5f + 0.1f * v;
    for (auto _ : state) benchmark::DoNotOptimize(ssim3d(a, b));
}
BENCHMARK(BM_Ssim3d)->Arg(16)->Arg(32);

}  // namespace

BENCHMARK_MAIN();
