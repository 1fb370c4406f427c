// Copyright 2026 The ScoreFusion Authors
// SPDX-License-Identifier: Apache-2.0

#include "scorefusion/phantom.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "scorefusion/errors.hpp"
#include "scorefusion/rng.hpp"
#include "scorefusion/volume_io.hpp"

namespace scorefusion {
namespace {

struct Ellipsoid {
    std::array<double, 3> center{};
    std::array<double, 3> radius{};
    double amplitude = 0.0;
};

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

// Soft indicator of an ellipsoid in normalized coordinates; edge width tau.
double soft_inside(const Ellipsoid& e, const std::array<double, 3>& u, double tau) {
    double r2 = 0.0;
    for (int a = 0; a < 3; ++a) {
        const double q = (u[a] - e.center[a]) / e.radius[a];
        r2 += q * q;
    }
    return sigmoid((1.0 - std::sqrt(r2)) / tau);
}

Volume white_noise(const Dims& d, Rng& rng) {
    Volume v(d);
    for (auto& x : v.storage()) x = static_cast<float>(rng.normal());
    return v;
}

// Rescales to zero mean and unit standard deviation.
void standardize(Volume& v) {
    double m = 0.0, m2 = 0.0;
    for (float x : v.storage()) m += x;
    m /= static_cast<double>(v.size());
    for (float x : v.storage()) m2 += (x - m) * (x - m);
    const double sd = std::sqrt(m2 / static_cast<double>(v.size()));
    for (auto& x : v.storage()) x = static_cast<float>(sd > 0 ? (x - m) / sd : 0.0);
}

double clamped_mean(const std::vector<double>& raw, double gain) {
    double acc = 0.0;
    for (double r : raw) acc += std::clamp(gain * r, 0.0, 1.0);
    return acc / static_cast<double>(raw.size());
}

int reflect(int i, int n) {
    if (n == 1) return 0;
    while (i < 0 || i >= n) i = i < 0 ? -i - 1 : 2 * n - i - 1;
    return i;
}

std::uint64_t split_key(std::uint64_t seed, std::size_t index) { return derive_seed(seed ^ 0x5b1e5b1e5b1e5b1eULL, index); }

}  // namespace

void PhantomSpec::validate() const {
    const std::size_t f = std::lcm<std::size_t>(8, std::max<std::size_t>(factor, 1));
    for (int a = 0; a < 3; ++a) {
        if (dims[a] == 0 || dims[a] % f != 0) {
            throw ConfigError("phantom dims " + to_string(dims) + " must be positive multiples of " + std::to_string(f));
        }
    }
    if (ellipsoids_min < 0 || ellipsoids_max < ellipsoids_min) throw ConfigError("bad ellipsoid count range");
    if (lesions_min < 0 || lesions_max < lesions_min) throw ConfigError("bad lesion count range");
    if (!(smoothness >= 0.0)) throw ConfigError("phantom smoothness must be non-negative");
    if (!(target_mean > 0.0 && target_mean < 1.0)) throw ConfigError("phantom target mean must lie in (0, 1)");
}

Volume gaussian_blur(const Volume& v, double sigma) {
    if (sigma <= 0.0) return v;
    const int radius = static_cast<int>(std::ceil(3.0 * sigma));
    std::vector<double> k(static_cast<std::size_t>(2 * radius + 1));
    double ks = 0.0;
    for (int i = -radius; i <= radius; ++i) ks += k[static_cast<std::size_t>(i + radius)] = std::exp(-0.5 * i * i / (sigma * sigma));
    for (auto& w : k) w /= ks;

    const Dims d = v.dims();
    std::vector<double> cur(v.storage().begin(), v.storage().end()), next(cur.size());
    const std::array<std::size_t, 3> ext{d.d1, d.d2, d.d3};
    const std::array<std::size_t, 3> stride{d.d2 * d.d3, d.d3, 1};
    for (int axis = 0; axis < 3; ++axis) {
        const int n = static_cast<int>(ext[static_cast<std::size_t>(axis)]);
        const std::size_t st = stride[static_cast<std::size_t>(axis)];
        for (std::size_t idx = 0; idx < cur.size(); ++idx) {
            const int pos = static_cast<int>((idx / st) % static_cast<std::size_t>(n));
            const std::size_t base = idx - static_cast<std::size_t>(pos) * st;
            double acc = 0.0;
            for (int o = -radius; o <= radius; ++o) {
                acc += k[static_cast<std::size_t>(o + radius)] * cur[base + static_cast<std::size_t>(reflect(pos + o, n)) * st];
            }
            next[idx] = acc;
        }
        std::swap(cur, next);
    }
    Volume out(d);
    for (std::size_t i = 0; i < cur.size(); ++i) out[i] = static_cast<float>(cur[i]);
    return out;
}

PhantomPair generate_phantom(const PhantomSpec& spec, std::uint64_t index) {
    spec.validate();
    Rng rng(derive_seed(spec.seed, index));
    const Dims d = spec.dims;

    Ellipsoid head;
    for (int a = 0; a < 3; ++a) {
        head.center[a] = rng.uniform(-0.05, 0.05);
        head.radius[a] = rng.uniform(0.72, 0.88);
    }
    auto inner = [&](double rmin, double rmax, double spread) {
        Ellipsoid e;
        for (int a = 0; a < 3; ++a) {
            e.center[a] = head.center[a] + rng.uniform(-spread, spread) * head.radius[a];
            e.radius[a] = head.radius[a] * rng.uniform(rmin, rmax);
        }
        return e;
    };
    std::vector<Ellipsoid> tissue;
    const auto n_ell = rng.uniform_int(spec.ellipsoids_min, spec.ellipsoids_max);
    for (std::int64_t i = 0; i < n_ell; ++i) {
        Ellipsoid e = inner(spec.ellipsoid_radius_min, spec.ellipsoid_radius_max, 0.5);
        e.amplitude = (rng.uniform() < 0.5 ? -1.0 : 1.0) * rng.uniform(0.15, 0.4);
        tissue.push_back(e);
    }
    std::vector<Ellipsoid> lesions;
    const auto n_les = rng.uniform_int(spec.lesions_min, spec.lesions_max);
    for (std::int64_t i = 0; i < n_les; ++i) {
        Ellipsoid e = inner(spec.lesion_radius_min, spec.lesion_radius_max, 0.45);
        e.amplitude = rng.uniform(0.6, 1.0);
        lesions.push_back(e);
    }

    Volume tex = gaussian_blur(white_noise(d, rng), spec.smoothness);
    standardize(tex);
    Volume tex_b = gaussian_blur(white_noise(d, rng), spec.smoothness);
    standardize(tex_b);

    std::vector<double> raw_a(d.count()), raw_b(d.count());
    for (std::size_t i = 0; i < d.d1; ++i)
        for (std::size_t j = 0; j < d.d2; ++j)
            for (std::size_t k = 0; k < d.d3; ++k) {
                const std::array<double, 3> u{(i + 0.5) / d.d1 * 2.0 - 1.0, (j + 0.5) / d.d2 * 2.0 - 1.0,
                                              (k + 0.5) / d.d3 * 2.0 - 1.0};
                const std::size_t n = (i * d.d2 + j) * d.d3 + k;
                const double in_head = soft_inside(head, u, 0.04);
                double a = 0.55;
                for (const auto& e : tissue) a += e.amplitude * soft_inside(e, u, 0.06);
                a = std::clamp(a, 0.05, 1.0);
                double les = 0.0;
                for (const auto& e : lesions) les += e.amplitude * soft_inside(e, u, 0.05);
                les = std::min(les, 1.0);
                const double t = spec.noise_amplitude * tex[n];
                const double tb = spec.noise_amplitude * (0.6 * tex[n] + 0.8 * tex_b[n]);
                raw_a[n] = in_head * (std::pow(a, 1.2) + t + 0.45 * les);
                raw_b[n] = in_head * (0.15 + 0.65 * std::pow(1.0 - a, 1.5) + tb - 0.35 * les);
            }

    // Gain on modality A chosen by bisection so the clamped mean hits the target.
    double lo = 0.0, hi = 1.0;
    while (clamped_mean(raw_a, hi) < spec.target_mean && hi < 1e6) hi *= 2.0;
    for (int it = 0; it < 60; ++it) {
        const double mid = 0.5 * (lo + hi);
        (clamped_mean(raw_a, mid) < spec.target_mean ? lo : hi) = mid;
    }
    const double gain = 0.5 * (lo + hi);

    PhantomPair out{Volume(d), Volume(d)};
    for (std::size_t n = 0; n < d.count(); ++n) {
        out.mod_a[n] = static_cast<float>(std::clamp(gain * raw_a[n], 0.0, 1.0));
        out.mod_b[n] = static_cast<float>(std::clamp(raw_b[n], 0.0, 1.0));
    }
    out.mod_a.declare_range(kMetricRange);
    out.mod_b.declare_range(kMetricRange);
    return out;
}

std::string to_string(Split s) { return s == Split::train ? "train" : "val"; }

std::vector<ManifestRecord> Manifest::subset(Split s) const {
    std::vector<ManifestRecord> out;
    for (const auto& r : records) {
        if (r.split == s) out.push_back(r);
    }
    return out;
}

std::vector<std::size_t> train_indices(std::uint64_t seed, std::size_t count, double split_fraction) {
    if (!(split_fraction >= 0.0 && split_fraction <= 1.0)) throw ConfigError("split fraction must lie in [0, 1]");
    std::vector<std::size_t> order(count);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return split_key(seed, a) < split_key(seed, b); });
    const auto n_train = static_cast<std::size_t>(std::llround(split_fraction * static_cast<double>(count)));
    order.resize(n_train);
    std::sort(order.begin(), order.end());
    return order;
}

Manifest build_dataset(const PhantomSpec& spec, std::size_t count, double split_fraction,
                       const std::filesystem::path& out_dir) {
    spec.validate();
    if (count == 0) throw ConfigError("phantom count must be positive");
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec) throw IoError("cannot create " + out_dir.string() + ": " + ec.message());

    const auto train = train_indices(spec.seed, count, split_fraction);
    Manifest m;
    for (std::size_t i = 0; i < count; ++i) {
        char id[32];
        std::snprintf(id, sizeof id, "ph%04zu", i);
        const PhantomPair p = generate_phantom(spec, i);
        ManifestRecord r;
        r.id = id;
        r.path_a = out_dir / (r.id + "_A.sfv");
        r.path_b = out_dir / (r.id + "_B.sfv");
        r.split = std::binary_search(train.begin(), train.end(), i) ? Split::train : Split::val;
        save_volume(p.mod_a, r.path_a);
        save_volume(p.mod_b, r.path_b);
        m.records.push_back(std::move(r));
    }
    write_manifest(m, out_dir / kManifestName);
    return m;
}

void write_manifest(const Manifest& m, const std::filesystem::path& file) {
    const auto dir = file.parent_path();
    std::ostringstream os;
    for (const auto& r : m.records) {
        os << r.id << '\t' << std::filesystem::relative(r.path_a, dir.empty() ? "." : dir).generic_string() << '\t'
           << std::filesystem::relative(r.path_b, dir.empty() ? "." : dir).generic_string() << '\t' << to_string(r.split)
           << '\n';
    }
    const std::string text = os.str();
    write_file_atomic(file, std::span<const std::uint8_t>(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

Manifest read_manifest(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw IoError("cannot open manifest " + file.string());
    const auto dir = file.parent_path();
    Manifest m;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::vector<std::string> cols;
        std::stringstream ss(line);
        std::string c;
        while (std::getline(ss, c, '\t')) cols.push_back(c);
        if (cols.size() != 4 || (cols[3] != "train" && cols[3] != "val")) {
            throw IoError(file.string() + ":" + std::to_string(lineno) + ": expected id, pathA, pathB, train|val");
        }
        ManifestRecord r;
        r.id = cols[0];
        r.path_a = std::filesystem::path(cols[1]).is_absolute() ? std::filesystem::path(cols[1]) : dir / cols[1];
        r.path_b = std::filesystem::path(cols[2]).is_absolute() ? std::filesystem::path(cols[2]) : dir / cols[2];
        r.split = cols[3] == "train" ? Split::train : Split::val;
        m.records.push_back(std::move(r));
    }
    return m;
}

Task parse_task(const std::string& s) {
    if (s == "sr") return Task::sr;
    if (s == "mt") return Task::mt;
    if (s == "both") return Task::both;
    throw ConfigError("task must be sr, mt or both, got '" + s + "'");
}

std::string to_string(Task t) {
    switch (t) {
        case Task::sr:
            return "sr";
        case Task::mt:
            return "mt";
        case Task::both:
            return "both";
    }
    return "sr";
}

int condition_count(Task t) { return t == Task::both ? 2 : 1; }

TaskInputs make_task_inputs(const PhantomPair& pair, Task task, const DegradationOperator& op) {
    if (pair.mod_a.dims() != pair.mod_b.dims()) {
        throw PairingError("modality dims " + to_string(pair.mod_a.dims()) + " and " + to_string(pair.mod_b.dims()) +
                           " differ");
    }
    TaskInputs in;
    in.y0 = pair.mod_a;
    switch (task) {
        case Task::sr:
            in.x.push_back(apply(op, pair.mod_a));
            break;
        case Task::mt:
            in.x.push_back(pair.mod_b);
            break;
        case Task::both:
            in.x.push_back(apply(op, pair.mod_a));
            in.x.push_back(pair.mod_b);
            break;
    }
    return in;
}

TaskInputs to_model_range(const TaskInputs& in) {
    TaskInputs out;
    for (const auto& v : in.x) out.x.push_back(normalize(v, kMetricRange, kModelRange));
    out.y0 = normalize(in.y0, kMetricRange, kModelRange);
    return out;
}

}  // namespace scorefusion
