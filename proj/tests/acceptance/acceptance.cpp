// Copyright 2026 The ScoreFusion Authors
// SPDX-License-Identifier: Apache-2.0

// Acceptance suite: one pass/fail line per criterion. Criteria 6 to 8 share a
// desk-scale experiment (16^3 phantoms, budgeted CPU training) that is built
// once on first use. Pass criterion numbers as arguments to run a subset.

#include <Eigen/Dense>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "fixtures.hpp"
#include "gradcheck.hpp"
#include "scorefusion/checkpoint.hpp"
#include "scorefusion/degrade.hpp"
#include "scorefusion/metrics.hpp"
#include "scorefusion/net2d.hpp"
#include "scorefusion/net3d.hpp"
#include "scorefusion/phantom.hpp"
#include "scorefusion/sample.hpp"
#include "scorefusion/schedule.hpp"
#include "scorefusion/train.hpp"
#include "scorefusion/volume_io.hpp"

using namespace scorefusion;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

// Desk budget for the CPU variant of the SR and multi-condition criteria.
constexpr std::size_t kPhantoms = 200;
constexpr std::size_t kEdge = 16;
constexpr std::int64_t kSteps2D = 1000;
constexpr std::int64_t kSteps3D = 1000;
constexpr double kLr2D = 1e-3;
constexpr double kLr3D = 1e-3;
constexpr int kSampleSteps = 10;
constexpr int kUncertaintyRuns = 5;
constexpr std::size_t kUncertaintyVolumes = 10;
constexpr std::uint64_t kSeed = 2026;

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, ...) __attribute__((format(printf, 1, 2)));
std::string fmt(const char* f, ...) {
    char buf[512];
    va_list ap;
    va_start(ap, f);
    std::vsnprintf(buf, sizeof buf, f, ap);
    va_end(ap);
    return buf;
}

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

double max_abs(const Volume& a, const Volume& b) {
    double m = 0.0;
    for (std::size_t n = 0; n < a.size(); ++n) m = std::max(m, std::abs(static_cast<double>(a[n]) - b[n]));
    return m;
}

Volume to_metric(const Volume& v) {
    Volume out = denormalize(v, kMetricRange, kModelRange);
    for (auto& x : out.storage()) x = std::clamp(x, 0.f, 1.f);
    return out;
}

PhantomSpec desk_spec() {
    PhantomSpec spec;
    spec.dims = {kEdge, kEdge, kEdge};
    spec.seed = kSeed;
    return spec;
}

// ---------------------------------------------------------------------------
// Shared desk experiment

struct BranchPair {
    std::unique_ptr<Net2D> axis1, axis2;
};

struct Desk {
    NoiseSchedule schedule = make_linear_schedule();
    DegradationOperator op = DegradationOperator::avg_pool(4);
    Manifest manifest;
    Dataset sr_train, sr_val, mt_train, mt_val, both_train, both_val;
    BranchPair sr, mt;
    std::unique_ptr<Net3D> fusion;  // SR, full variant
    std::unique_ptr<Net3D> small;   // SR + MT, small variant with four branches
    double seconds_2d = 0.0, seconds_3d = 0.0, seconds_small = 0.0;
};

TrainConfig desk_train(double lr, std::int64_t steps, std::uint64_t seed) {
    TrainConfig tc;
    tc.lr = lr;
    tc.batch = 4;
    tc.steps = steps;
    tc.seed = seed;
    tc.patch = {kEdge, kEdge, kEdge};
    tc.finetune = false;
    return tc;
}

std::unique_ptr<Net2D> train_branch(const Desk& d, const Dataset& data, SliceAxis axis, std::uint64_t seed) {
    Trainer2D tr(Net2D(Net2DConfig::desk(1), derive_seed(seed, 1)), axis, d.schedule, desk_train(kLr2D, kSteps2D, seed));
    tr.run(data, kSteps2D);
    return std::make_unique<Net2D>(tr.net());
}

std::vector<Branch> pair_branches(const BranchPair& p, int condition) {
    return {{p.axis1.get(), SliceAxis::axis1, {condition}}, {p.axis2.get(), SliceAxis::axis2, {condition}}};
}

Desk& desk_sr() {
    static std::unique_ptr<Desk> d;
    if (d) return *d;
    d = std::make_unique<Desk>();
    const fs::path dir = testing::temp_dir("acceptance_desk");
    d->manifest = build_dataset(desk_spec(), kPhantoms, 0.8, dir);
    d->sr_train = load_dataset(d->manifest, Split::train, Task::sr, d->op);
    d->sr_val = load_dataset(d->manifest, Split::val, Task::sr, d->op);

    auto t0 = Clock::now();
    d->sr.axis1 = train_branch(*d, d->sr_train, SliceAxis::axis1, derive_seed(kSeed, 11));
    d->sr.axis2 = train_branch(*d, d->sr_train, SliceAxis::axis2, derive_seed(kSeed, 12));
    d->seconds_2d = seconds_since(t0);

    t0 = Clock::now();
    const Net3DConfig cfg = Net3DConfig::desk(Net3DVariant::full, 1, Net2DConfig::desk(1));
    Trainer3D tr(Net3D(cfg, derive_seed(kSeed, 13)), pair_branches(d->sr, 0), d->schedule,
                 desk_train(kLr3D, kSteps3D, derive_seed(kSeed, 14)));
    tr.run(d->sr_train);
    d->fusion = std::make_unique<Net3D>(tr.net());
    d->seconds_3d = seconds_since(t0);
    return *d;
}

Desk& desk_both() {
    Desk& d = desk_sr();
    if (d.small) return d;
    d.mt_train = load_dataset(d.manifest, Split::train, Task::mt, d.op);
    d.mt_val = load_dataset(d.manifest, Split::val, Task::mt, d.op);
    d.both_train = load_dataset(d.manifest, Split::train, Task::both, d.op);
    d.both_val = load_dataset(d.manifest, Split::val, Task::both, d.op);
    auto t0 = Clock::now();
    d.mt.axis1 = train_branch(d, d.mt_train, SliceAxis::axis1, derive_seed(kSeed, 21));
    d.mt.axis2 = train_branch(d, d.mt_train, SliceAxis::axis2, derive_seed(kSeed, 22));
    std::vector<Branch> four = pair_branches(d.sr, 0);
    for (const Branch& b : pair_branches(d.mt, 1)) four.push_back(b);
    const Net3DConfig cfg = Net3DConfig::desk(Net3DVariant::small, 2, Net2DConfig::desk(1), 4);
    Trainer3D tr(Net3D(cfg, derive_seed(kSeed, 23)), four, d.schedule,
                 desk_train(kLr3D, kSteps3D, derive_seed(kSeed, 24)));
    tr.run(d.both_train);
    d.small = std::make_unique<Net3D>(tr.net());
    d.seconds_small = seconds_since(t0);
    return d;
}

SampleConfig desk_sample(const Desk& d, FusionMode mode, bool consistency) {
    SampleConfig c;
    c.plan = make_step_plan(d.schedule, SamplerMode::ddim, kSampleSteps);
    c.fusion = mode;
    c.consistency = consistency;
    c.op = d.op;
    return c;
}

struct SetResult {
    double psnr = 0.0;
    std::vector<Volume> preds;  // metric range
};

SetResult sample_set(const SamplerModels& m, const Dataset& val, SampleConfig c, std::size_t limit = 0) {
    SetResult r;
    const std::size_t n = limit ? std::min(limit, val.size()) : val.size();
    for (std::size_t i = 0; i < n; ++i) {
        c.seed = derive_seed(kSeed, 1000 + i);
        const Volume y = to_metric(sample_volume(m, val.items[i].x, c));
        r.psnr += psnr(y, to_metric(val.items[i].y0));
        r.preds.push_back(y);
    }
    r.psnr /= static_cast<double>(n);
    return r;
}

// ---------------------------------------------------------------------------
// Criteria

Outcome zero_init_equivalence() {
    const auto t0 = Clock::now();
    const NoiseSchedule s = make_linear_schedule();
    const Net2D a(Net2DConfig::desk(1), 1), b(Net2DConfig::desk(1), 2);
    const std::vector<Branch> branches{{&a, SliceAxis::axis1, {0}}, {&b, SliceAxis::axis2, {0}}};
    const Net3D fusion(Net3DConfig::desk(Net3DVariant::full, 1, Net2DConfig::desk(1)), 3);
    const PhantomPair p = generate_phantom(desk_spec(), 0);
    const TaskInputs in = to_model_range(make_task_inputs(p, Task::sr, DegradationOperator::avg_pool(4)));
    SampleConfig c;
    c.plan = make_step_plan(s, SamplerMode::ddim, 10);
    c.seed = 7;
    const Volume learned = sample_volume({branches, &fusion, &s}, in.x, c);
    c.fusion = FusionMode::average;
    const Volume avg = sample_volume({branches, nullptr, &s}, in.x, c);
    const double d = max_abs(learned, avg), secs = seconds_since(t0);
    return {d < 1e-5 && secs < 60.0, fmt("max|d| = %.3g (< 1e-5), %.1f s (< 60 s)", d, secs)};
}

Outcome consistency_projection() {
    const NoiseSchedule s = make_linear_schedule();
    const Net2D a(Net2DConfig::desk(1), 4), b(Net2DConfig::desk(1), 5);
    const std::vector<Branch> branches{{&a, SliceAxis::axis1, {0}}, {&b, SliceAxis::axis2, {0}}};
    const Net3D fusion(Net3DConfig::desk(Net3DVariant::full, 1, Net2DConfig::desk(1)), 6);
    const auto op = DegradationOperator::avg_pool(4);
    const TaskInputs in = to_model_range(make_task_inputs(generate_phantom(desk_spec(), 1), Task::sr, op));
    const Volume& x = in.x[0];

    // Dense oracle: every 4x4x4 block is mapped by the 64x64 matrix of 1/64.
    const Eigen::MatrixXd A = Eigen::MatrixXd::Constant(64, 64, 1.0 / 64.0);
    auto oracle_residual = [&](const Volume& y) {
        double worst = 0.0;
        const Dims d = y.dims();
        Eigen::VectorXd yb(64), xb(64);
        for (std::size_t bi = 0; bi < d.d1; bi += 4)
            for (std::size_t bj = 0; bj < d.d2; bj += 4)
                for (std::size_t bk = 0; bk < d.d3; bk += 4) {
                    int n = 0;
                    for (std::size_t i = 0; i < 4; ++i)
                        for (std::size_t j = 0; j < 4; ++j)
                            for (std::size_t k = 0; k < 4; ++k, ++n) {
                                yb(n) = y(bi + i, bj + j, bk + k);
                                xb(n) = x(bi + i, bj + j, bk + k);
                            }
                    worst = std::max(worst, (A * yb - xb).cwiseAbs().maxCoeff());
                }
        return worst;
    };

    SampleConfig c;
    c.plan = make_step_plan(s, SamplerMode::ddim, 10);
    c.consistency = true;
    c.op = op;
    c.seed = 8;
    double worst_res = 0.0, worst_idem = 0.0;
    int steps = 0;
    const Volume out = sample_volume({branches, &fusion, &s}, in.x, c, [&](const StepTrace&, const Volume& y0) {
        ++steps;
        worst_res = std::max(worst_res, oracle_residual(y0));
        worst_idem = std::max(worst_idem, max_abs(project_consistency(op, y0, x), y0));
    });
    const double final_res = oracle_residual(out);
    const bool pass = steps == 10 && worst_res <= 1e-5 && worst_idem <= 1e-6 && final_res <= 1e-5;
    return {pass, fmt("%d steps, max ||A y0 - x||inf = %.3g (<= 1e-5), idempotence %.3g (<= 1e-6), output %.3g", steps,
                      worst_res, worst_idem, final_res)};
}

Outcome schedule_check() {
    const NoiseSchedule s = make_linear_schedule(1000, 1e-4, 0.02);
    // Independent 64-bit oracle.
    double oracle = 1.0;
    for (int t = 1; t <= 1000; ++t) oracle *= 1.0 - (1e-4 + (0.02 - 1e-4) * (t - 1) / 999.0);
    const double rel = std::abs(s.alpha_bar(1000) - oracle) / oracle;

    Rng rng(11);
    Volume y0(Dims{2, 2, 2});
    for (auto& v : y0.storage()) v = static_cast<float>(rng.uniform(-1.0, 1.0));
    std::vector<double> sum(8, 0.0), sq(8, 0.0);
    Volume eps(Dims{2, 2, 2});
    const int draws = 100000;
    for (int i = 0; i < draws; ++i) {
        for (auto& v : eps.storage()) v = static_cast<float>(rng.normal());
        const Volume yt = q_sample(y0, 1000, eps, s);
        for (std::size_t n = 0; n < 8; ++n) {
            sum[n] += yt[n];
            sq[n] += static_cast<double>(yt[n]) * yt[n];
        }
    }
    double worst = 0.0;
    for (std::size_t n = 0; n < 8; ++n) {
        const double mu = sum[n] / draws;
        worst = std::max(worst, std::abs(std::sqrt(sq[n] / draws - mu * mu) - 1.0));
    }
    return {rel <= 1e-7 && worst <= 0.01,
            fmt("alpha_bar_T rel err %.3g (<= 1e-7), worst |std - 1| %.4f over 1e5 draws (<= 0.01)", rel, worst)};
}

Outcome gradient_checks() {
    const Net2DConfig bc = testing::micro2d();
    const NoiseSchedule s = make_linear_schedule();
    Rng rng(12);
    auto tensor = [&](int n, int c, int d, int h, int w) {
        nn::Tensor<double> t(n, c, d, h, w);
        for (auto& v : t.data) v = rng.normal();
        return t;
    };
    const Net2D net2(bc, 13);
    const auto y0 = tensor(2, 1, 1, 8, 8), x = tensor(2, 1, 1, 8, 8), e2 = tensor(2, 1, 1, 8, 8);
    const std::vector<int> t2{37, 640};
    const std::vector<double> p2(net2.params().begin(), net2.params().end());
    const auto r2 = testing::gradient_check(
        p2,
        [&](std::span<const double> p, std::span<double> g) {
            return loss_2d_generic<double>(net2.unet(), p, g, y0, x, t2, e2, s);
        },
        150, 14);

    Net3DConfig c3 = testing::micro3d(bc);
    c3.zero_output = false;
    const Net3D net3(c3, 15);
    const Dims d{4, 4, 4};
    BranchOutput a, b;
    a.axis = SliceAxis::axis1;
    b.axis = SliceAxis::axis2;
    a.eps_hat = testing::random_volume(d, rng);
    b.eps_hat = testing::random_volume(d, rng);
    auto ftensor = [&](int c, int dd, int h, int w) {
        nn::Tensor<float> t(1, c, dd, h, w);
        for (auto& v : t.data) v = static_cast<float>(rng.normal());
        return t;
    };
    a.pyramid = {ftensor(4, 4, 4, 4), ftensor(8, 2, 4, 2)};
    b.pyramid = {ftensor(4, 4, 4, 4), ftensor(8, 2, 2, 4)};
    const BranchOutput* br[2] = {&a, &b};
    std::vector<nn::Tensor<double>> pooled;
    for (const auto& p : pool_pyramids(br, d, 2)) pooled.push_back(p.cast<double>());
    const std::vector<Volume> xs{testing::random_volume(d, rng)};
    const auto input = fusion_input<double>(testing::random_volume(d, rng), xs, br);
    nn::Tensor<double> scores(1, 2, 4, 4, 4);
    for (std::size_t i = 0; i < d.count(); ++i) {
        scores.data[i] = a.eps_hat[i];
        scores.data[d.count() + i] = b.eps_hat[i];
    }
    const auto e3 = tensor(1, 1, 4, 4, 4);
    const std::vector<double> p3(net3.params().begin(), net3.params().end());
    const auto r3 = testing::gradient_check(
        p3,
        [&](std::span<const double> p, std::span<double> g) {
            return loss_3d_generic<double>(net3, p, g, input, scores, pooled, 420, e3);
        },
        150, 16);
    const bool pass = r2.probed >= 100 && r3.probed >= 100 && r2.max_rel_error < 1e-3 && r3.max_rel_error < 1e-3;
    return {pass, fmt("2D max rel err %.3g over %zu probes, 3D %.3g over %zu probes (< 1e-3)", r2.max_rel_error,
                      r2.probed, r3.max_rel_error, r3.probed)};
}

Outcome fusion_algebra() {
    const Net2DConfig bc = testing::micro2d();
    Rng rng(17);
    const Dims d{8, 8, 8};
    double worst_eq = 0.0, worst_sum = 0.0;
    for (int trial = 0; trial < 5; ++trial) {
        for (int k : {2, 4}) {
            Net3DConfig c = testing::micro3d(bc, 1, k, false);
            c.zero_output = false;
            c.lambda = rng.uniform(-2.0, 2.0);
            const Net3D net(c, derive_seed(18, static_cast<std::uint64_t>(trial * 10 + k)));
            std::vector<BranchOutput> outs(static_cast<std::size_t>(k));
            std::vector<const BranchOutput*> ptrs;
            for (auto& o : outs) {
                o.eps_hat = testing::random_volume(d, rng);
                ptrs.push_back(&o);
            }
            const std::vector<Volume> x{testing::random_volume(d, rng)};
            const FusionOutput f = forward_3d(net, testing::random_volume(d, rng), x, ptrs, 1 + trial * 150);
            for (std::size_t i = 0; i < d.count(); ++i) {
                double expect = c.lambda * f.R[i];
                if (k == 2) {
                    expect += (0.5 + f.w[i]) * outs[0].eps_hat[i] + (0.5 - f.w[i]) * outs[1].eps_hat[i];
                } else {
                    for (std::size_t j = 0; j < outs.size(); ++j) expect += f.coefficients[j][i] * outs[j].eps_hat[i];
                }
                double sum = 0.0;
                for (const auto& co : f.coefficients) sum += co[i];
                worst_eq = std::max(worst_eq, std::abs(expect - f.eps3d[i]));
                worst_sum = std::max(worst_sum, std::abs(sum - 1.0));
            }
        }
    }
    return {worst_eq <= 1e-6 && worst_sum <= 1e-6,
            fmt("max |eps3d - combination| = %.3g (<= 1e-6), max |sum of weights - 1| = %.3g", worst_eq, worst_sum)};
}

Outcome desk_sr_improvement() {
    const auto t0 = Clock::now();
    Desk& d = desk_sr();
    const auto branches = pair_branches(d.sr, 0);
    const SetResult learned =
        sample_set({branches, d.fusion.get(), &d.schedule}, d.sr_val, desk_sample(d, FusionMode::learned, true));
    const SetResult avg =
        sample_set({branches, nullptr, &d.schedule}, d.sr_val, desk_sample(d, FusionMode::average, true));
    std::vector<Volume> gts;
    for (const auto& it : d.sr_val.items) gts.push_back(to_metric(it.y0));
    const FeatureExtractor fx;
    const FeatureSet fg = extract_features(fx, gts);
    const double mmd_l = mmd(extract_features(fx, learned.preds), fg);
    const double mmd_a = mmd(extract_features(fx, avg.preds), fg);
    const double secs = seconds_since(t0);
    const double gain = learned.psnr - avg.psnr;
    return {gain >= 0.05 && secs <= 1800.0,
            fmt("val PSNR learned %.3f dB vs average %.3f dB, gain %+.3f dB (>= +0.05); MMD %.4g vs %.4g (reported); "
                "%zu val volumes, train 2D %.0f s + 3D %.0f s, total %.0f s (<= 1800 s)",
                learned.psnr, avg.psnr, gain, mmd_l, mmd_a, d.sr_val.size(), d.seconds_2d, d.seconds_3d, secs)};
}

Outcome multi_condition_fusion() {
    Desk& d = desk_both();
    std::vector<Branch> four = pair_branches(d.sr, 0);
    for (const Branch& b : pair_branches(d.mt, 1)) four.push_back(b);
    const SetResult fused =
        sample_set({four, d.small.get(), &d.schedule}, d.both_val, desk_sample(d, FusionMode::learned, true));
    const auto sr_b = pair_branches(d.sr, 0);
    const auto mt_b = pair_branches(d.mt, 0);
    const SetResult sr_only =
        sample_set({sr_b, nullptr, &d.schedule}, d.sr_val, desk_sample(d, FusionMode::average, true));
    const SetResult mt_only =
        sample_set({mt_b, nullptr, &d.schedule}, d.mt_val, desk_sample(d, FusionMode::average, false));
    const double best = std::max(sr_only.psnr, mt_only.psnr);
    return {fused.psnr >= best,
            fmt("val PSNR fused (small, 4 branches) %.3f dB vs single-condition SR %.3f dB, MT %.3f dB (fused >= best); "
                "MT branches + small fusion trained in %.0f s",
                fused.psnr, sr_only.psnr, mt_only.psnr, d.seconds_small)};
}

Outcome mace_ordering() {
    Rng rng(19);
    const Dims dm{8, 8, 8};
    Volume gt(dm), mu(dm), sd(dm), sd3(dm);
    for (std::size_t n = 0; n < gt.size(); ++n) {
        gt[n] = static_cast<float>(rng.uniform());
        mu[n] = static_cast<float>(rng.uniform());
        sd[n] = std::abs(gt[n] - mu[n]);
        sd3[n] = 3.f * sd[n];
    }
    const double exact = mace(mu, sd, gt), scaled = mace(mu, sd3, gt);

    Desk& d = desk_sr();
    const auto branches = pair_branches(d.sr, 0);
    SampleConfig c = desk_sample(d, FusionMode::learned, true);
    c.runs = kUncertaintyRuns;
    double m_sampler = 0.0, m_control = 0.0;
    const std::size_t n = std::min(kUncertaintyVolumes, d.sr_val.size());
    for (std::size_t i = 0; i < n; ++i) {
        c.seed = derive_seed(kSeed, 2000 + i);
        const UncertainSample u = sample_with_uncertainty({branches, d.fusion.get(), &d.schedule}, d.sr_val.items[i].x, c);
        const Volume g = to_metric(d.sr_val.items[i].y0);
        const Volume mean = to_metric(u.stats.mean);
        Volume sigma = u.stats.std, control(g.dims());
        for (auto& v : sigma.storage()) v *= 0.5f;  // model range spans 2
        for (std::size_t k = 0; k < g.size(); ++k) control[k] = 3.f * std::abs(g[k] - mean[k]);
        m_sampler += mace(mean, sigma, g) / static_cast<double>(n);
        m_control += mace(mean, control, g) / static_cast<double>(n);
    }
    const bool pass = exact == 0.0 && scaled > exact && m_sampler < m_control;
    return {pass, fmt("synthetic MACE %.3g (== 0), x3 %.4f (> 0); %d-run sampler MACE %.4f < x3 control %.4f on %zu val "
                      "volumes",
                      exact, scaled, kUncertaintyRuns, m_sampler, m_control, n)};
}

Outcome recovery_rate_check() {
    const double r = recovery_rate(87.77, 86.82, 89.17);
    return {std::abs(r - 0.4046) <= 0.0015, fmt("recovery rate %.4f (0.4046 +- 0.0015)", r)};
}

Outcome reproducibility() {
    const fs::path dir = testing::temp_dir("acceptance_repro");
    PhantomSpec spec = desk_spec();
    const Manifest m = build_dataset(spec, 10, 0.8, dir);
    const auto op = DegradationOperator::avg_pool(4);
    const Dataset data = load_dataset(m, Split::train, Task::sr, op);
    const NoiseSchedule s = make_linear_schedule();
    const TrainConfig tc = desk_train(kLr2D, 100, 31);

    auto trainer = [&] { return Trainer2D(Net2D(Net2DConfig::desk(1), 32), SliceAxis::axis1, s, tc); };
    Trainer2D a = trainer(), b = trainer();
    a.run(data, 100);
    b.run(data, 100);
    save_checkpoint(a.checkpoint({{"seed", "31"}}), dir / "a.sfck");
    save_checkpoint(b.checkpoint({{"seed", "31"}}), dir / "b.sfck");
    const bool ck_same = read_file(dir / "a.sfck") == read_file(dir / "b.sfck");

    Trainer2D half = trainer();
    half.run(data, 50);
    save_checkpoint(half.checkpoint({{"seed", "31"}}), dir / "half.sfck");
    Trainer2D resumed(Net2D(Net2DConfig::desk(1), 99), SliceAxis::axis1, s, tc);
    resumed.restore(load_checkpoint(dir / "half.sfck"));
    resumed.run(data, 50);
    save_checkpoint(resumed.checkpoint({{"seed", "31"}}), dir / "resumed.sfck");
    const bool resume_same = read_file(dir / "resumed.sfck") == read_file(dir / "a.sfck");

    const Net2D other(Net2DConfig::desk(1), 33);
    const std::vector<Branch> branches{{&a.net(), SliceAxis::axis1, {0}}, {&other, SliceAxis::axis2, {0}}};
    const Net3D fusion(Net3DConfig::desk(Net3DVariant::full, 1, Net2DConfig::desk(1)), 34);
    SampleConfig c;
    c.plan = make_step_plan(s, SamplerMode::ddim, 5);
    c.consistency = true;
    c.seed = 35;
    const Volume v1 = sample_volume({branches, &fusion, &s}, data.items[0].x, c);
    const Volume v2 = sample_volume({branches, &fusion, &s}, data.items[0].x, c);
    save_volume(v1, dir / "v1.sfv");
    save_volume(v2, dir / "v2.sfv");
    const bool sample_same = read_file(dir / "v1.sfv") == read_file(dir / "v2.sfv");

    const Volume src = load_volume(m.records[0].path_a);
    save_volume(src, dir / "copy.sfv");
    const bool sfv_same = read_file(dir / "copy.sfv") == read_file(m.records[0].path_a) &&
                          encode_sfv(load_volume(dir / "copy.sfv")) == read_file(dir / "copy.sfv");

    auto yn = [](bool b) { return b ? "identical" : "DIFFERENT"; };
    return {ck_same && resume_same && sample_same && sfv_same,
            fmt("checkpoints after 100 steps %s; resume 50+50 vs 100 %s; sampled volumes %s; SFV1 roundtrip %s",
                yn(ck_same), yn(resume_same), yn(sample_same), yn(sfv_same))};
}

struct Criterion {
    int id;
    const char* name;
    std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
    const std::vector<Criterion> all{
        {1, "zero-initialized fusion equals the score average", zero_init_equivalence},
        {2, "consistency projection at every sampling step", consistency_projection},
        {3, "noise schedule product and forward-process variance", schedule_check},
        {4, "2D and 3D gradient checks", gradient_checks},
        {5, "weight-plus-residual fusion algebra", fusion_algebra},
        {6, "desk-scale SR gain of learned fusion over averaging", desk_sr_improvement},
        {7, "multi-condition fusion beats every single condition", multi_condition_fusion},
        {8, "MACE ordering", mace_ordering},
        {9, "recovery-rate formula", recovery_rate_check},
        {10, "reproducibility and I/O", reproducibility},
    };
    std::set<int> chosen;
    for (int i = 1; i < argc; ++i) chosen.insert(std::atoi(argv[i]));

    int failed = 0;
    for (const auto& c : all) {
        if (!chosen.empty() && !chosen.count(c.id)) continue;
        const auto t0 = Clock::now();
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        std::printf("[%s] %2d %s: %s [%.1f s]\n", o.pass ? "PASS" : "FAIL", c.id, c.name, o.detail.c_str(),
                    seconds_since(t0));
        std::fflush(stdout);
        failed += o.pass ? 0 : 1;
    }
    std::printf("%d criteria failed\n", failed);
    return failed == 0 ? 0 : 1;
}
