// Copyright 2026 The ScoreFusion Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "scorefusion/degrade.hpp"
#include "scorefusion/volume.hpp"

namespace scorefusion {

/// Parameters of the synthetic paired-volume generator.
struct PhantomSpec {
    Dims dims{32, 32, 24};
    std::uint64_t seed = 0;
    int ellipsoids_min = 3, ellipsoids_max = 6;
    double ellipsoid_radius_min = 0.15, ellipsoid_radius_max = 0.35;  // fraction of the head radius
    int lesions_min = 1, lesions_max = 3;
    double lesion_radius_min = 0.06, lesion_radius_max = 0.14;
    double smoothness = 1.0;  // blur sigma of the texture noise, in voxels
    double noise_amplitude = 0.08;
    double target_mean = 0.35;  // mean intensity of modality A
    std::size_t factor = 4;     // degradation factor the dims must divide into

    void validate() const;
};

struct PhantomPair {
    Volume mod_a;
    Volume mod_b;
};

/// Fully determined by (spec.seed, index). Both volumes lie in [0, 1].
PhantomPair generate_phantom(const PhantomSpec& spec, std::uint64_t index);

/// Separable Gaussian blur with mirrored borders.
Volume gaussian_blur(const Volume& v, double sigma);

enum class Split { train, val };
std::string to_string(Split s);

struct ManifestRecord {
    std::string id;
    std::filesystem::path path_a;
    std::filesystem::path path_b;
    Split split = Split::train;
};

struct Manifest {
    std::vector<ManifestRecord> records;

    std::vector<ManifestRecord> subset(Split s) const;
};

inline constexpr const char* kManifestName = "manifest.tsv";

/// Generates `count` phantoms into out_dir and writes out_dir/manifest.tsv.
/// The first round(split_fraction * count) indices in hash order are train.
Manifest build_dataset(const PhantomSpec& spec, std::size_t count, double split_fraction,
                       const std::filesystem::path& out_dir);

/// Indices assigned to the training split, in ascending order.
std::vector<std::size_t> train_indices(std::uint64_t seed, std::size_t count, double split_fraction);

/// Paths in the file are relative to its directory; the result holds them resolved.
Manifest read_manifest(const std::filesystem::path& file);
void write_manifest(const Manifest& m, const std::filesystem::path& file);

enum class Task { sr, mt, both };
Task parse_task(const std::string& s);
std::string to_string(Task t);
int condition_count(Task t);

/// Condition volumes and target of one example, in the [0, 1] metric range.
struct TaskInputs {
    std::vector<Volume> x;
    Volume y0;
};

/// sr: x = A(modA); mt: x = modB; both: x = (A(modA), modB). y0 = modA.
TaskInputs make_task_inputs(const PhantomPair& pair, Task task, const DegradationOperator& op);

/// The same example mapped to model range [-1, 1].
TaskInputs to_model_range(const TaskInputs& in);

}  // namespace scorefusion
