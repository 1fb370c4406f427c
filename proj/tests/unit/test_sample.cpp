// Copyright 2026 The ScoreFusion Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest/doctest.h>

#include <cmath>

#include "fixtures.hpp"
#include "scorefusion/errors.hpp"
#include "scorefusion/sample.hpp"

using namespace scorefusion;
using namespace scorefusion::testing;

namespace {

double max_abs(const Volume& a, const Volume& b) {
    double m = 0.0;
    for (std::size_t n = 0; n < a.size(); ++n) m = std::max(m, std::abs(static_cast<double>(a[n]) - b[n]));
    return m;
}

struct Setup {
    NoiseSchedule schedule = make_linear_schedule();
    Net2D b1{micro2d(), 21};
    Net2D b2{micro2d(), 22};
    std::vector<Branch> branches{{&b1, SliceAxis::axis1, {0}}, {&b2, SliceAxis::axis2, {0}}};
    Net3D fusion{micro3d(micro2d()), 23};
    Dataset data = sr_dataset(1, {8, 8, 8}, 3);

    SamplerModels models(bool with_fusion = true) const {
        return {branches, with_fusion ? &fusion : nullptr, &schedule};
    }
    SampleConfig config(int steps = 5) const {
        SampleConfig c;
        c.plan = make_step_plan(schedule, SamplerMode::ddim, steps);
        c.seed = 17;
        return c;
    }
};

}  // namespace

TEST_CASE("fresh fusion sampling equals the score average") {
    const Setup s;
    SampleConfig c = s.config();
    const Volume learned = sample_volume(s.models(), s.data.items[0].x, c);
    c.fusion = FusionMode::average;
    const Volume avg = sample_volume(s.models(false), s.data.items[0].x, c);
    CHECK(max_abs(learned, avg) < 1e-5);
}

TEST_CASE("sampling is bit-identical for identical seeds and differs otherwise") {
    const Setup s;
    SampleConfig c = s.config();
    const Volume a = sample_volume(s.models(), s.data.items[0].x, c);
    const Volume b = sample_volume(s.models(), s.data.items[0].x, c);
    CHECK(a == b);
    c.seed = 18;
    CHECK_FALSE(sample_volume(s.models(), s.data.items[0].x, c) == a);
    for (float v : a.storage()) {
        CHECK(v >= -1.f);
        CHECK(v <= 1.f);
    }
}

TEST_CASE("consistency holds at every step and at the output") {
    const Setup s;
    SampleConfig c = s.config(6);
    c.consistency = true;
    std::vector<StepTrace> traces;
    const auto& x = s.data.items[0].x;
    const Volume y = sample_volume(s.models(), x, c, [&](const StepTrace& t, const Volume& y0) {
        traces.push_back(t);
        CHECK(consistency_residual(c.op, y0, x[0]) <= 1e-5);
    });
    REQUIRE(traces.size() == 6);
    for (const auto& t : traces) CHECK(t.residual <= 1e-5);
    CHECK(traces.back().target == 0);
    CHECK(consistency_residual(c.op, y, x[0]) <= 1e-5);

    SampleConfig off = s.config(3);
    sample_volume(s.models(), x, off, [](const StepTrace& t, const Volume&) { CHECK(std::isnan(t.residual)); });
}

TEST_CASE("sampler validates its inputs") {
    const Setup s;
    SampleConfig c = s.config();
    CHECK_THROWS_AS(sample_volume(s.models(false), s.data.items[0].x, c), ConfigError);
    Volume odd({8, 8, 12});
    CHECK_THROWS_AS(sample_volume(s.models(), std::vector<Volume>{odd}, c), ShapeError);
    c.consistency = true;
    Rng rng(1);
    const Volume rough = random_volume({8, 8, 8}, rng);
    CHECK_THROWS_AS(sample_volume(s.models(), std::vector<Volume>{rough}, c), ConsistencyDomainError);
}

TEST_CASE("uncertainty statistics") {
    Rng rng(4);
    const Volume r1 = random_volume({2, 2, 2}, rng), r2 = random_volume({2, 2, 2}, rng);
    const UncertaintyStats two = summarize_runs(std::vector<Volume>{r1, r2});
    CHECK(two.n == 2);
    for (std::size_t n = 0; n < r1.size(); ++n) {
        CHECK(two.std[n] == doctest::Approx(std::abs(r1[n] - r2[n]) / std::sqrt(2.0)).epsilon(1e-6));
        CHECK(two.mean[n] == doctest::Approx(0.5 * (r1[n] + r2[n])).epsilon(1e-6));
    }
    const UncertaintyStats same = summarize_runs(std::vector<Volume>{r1, r1, r1});
    for (std::size_t n = 0; n < r1.size(); ++n) {
        CHECK(same.std[n] == 0.f);
        CHECK(same.mean[n] == doctest::Approx(r1[n]));
    }
    CHECK_THROWS_AS(summarize_runs(std::vector<Volume>{r1}), ConfigError);
}

TEST_CASE("multi-run sampling returns the first run as the point estimate") {
    const Setup s;
    SampleConfig c = s.config(3);
    c.runs = 3;
    const UncertainSample u = sample_with_uncertainty(s.models(), s.data.items[0].x, c);
    CHECK(u.stats.n == 3);
    CHECK(u.point == sample_volume(s.models(), s.data.items[0].x, s.config(3)));
    bool spread = false;
    for (float v : u.stats.std.storage()) {
        CHECK(v >= 0.f);
        spread = spread || v > 0.f;
    }
    CHECK(spread);
    c.runs = 1;
    CHECK_THROWS_AS(sample_with_uncertainty(s.models(), s.data.items[0].x, c), ConfigError);
}

TEST_CASE("multi-condition fusion") {
    const NoiseSchedule schedule = make_linear_schedule();
    const Net2D a1(micro2d(), 1), a2(micro2d(), 2), m1(micro2d(), 3), m2(micro2d(), 4);
    const std::vector<Branch> branches{{&a1, SliceAxis::axis1, {0}},
                                       {&a2, SliceAxis::axis2, {0}},
                                       {&m1, SliceAxis::axis1, {1}},
                                       {&m2, SliceAxis::axis2, {1}}};
    Net3DConfig fc = micro3d(micro2d(), 2, 4, false);
    fc.variant = Net3DVariant::small;
    const Net3D fusion(fc, 9);
    Rng rng(3);
    const Dataset d = sr_dataset(1, {8, 8, 8}, 5);
    const std::vector<Volume> x{d.items[0].x[0], random_volume({8, 8, 8}, rng, 0.5)};
    SampleConfig c;
    c.plan = make_step_plan(schedule, SamplerMode::ddim, 4);
    c.seed = 5;
    const SamplerModels learned{branches, &fusion, &schedule};
    const Volume y = fuse_multimodality(learned, x, c);
    c.fusion = FusionMode::average;
    const SamplerModels avg{branches, nullptr, &schedule};
    // Fresh K-way head: softmax of zeros is the uniform average.
    CHECK(max_abs(y, fuse_multimodality(avg, x, c)) < 1e-5);

    const std::vector<Branch> bad{branches[0], branches[1], branches[2]};
    CHECK_THROWS_AS(fuse_multimodality(SamplerModels{bad, nullptr, &schedule}, x, c), ConfigError);
    const std::vector<Branch> parallel{branches[0], branches[0], branches[2], branches[3]};
    CHECK_THROWS_AS(fuse_multimodality(SamplerModels{parallel, nullptr, &schedule}, x, c), ConfigError);
}
