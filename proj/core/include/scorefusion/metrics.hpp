// Copyright 2026 The ScoreFusion Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "scorefusion/volume.hpp"

namespace scorefusion {

/// 10 log10(1 / MSE) for data range 1; +infinity when the volumes agree.
double psnr(const Volume& pred, const Volume& gt);

struct SsimParams {
    int window = 7;
    double sigma = 1.5;
    double k1 = 0.01;
    double k2 = 0.03;
    double data_range = 1.0;
};

/// Mean local SSIM over every fully contained 3D Gaussian window.
double ssim3d(const Volume& pred, const Volume& gt, const SsimParams& p = {});

using FeatureSet = std::vector<std::vector<double>>;

/// Biased MMD^2 with a Gaussian RBF kernel whose bandwidth is the median
/// pairwise distance over the pooled set.
double mmd(const FeatureSet& a, const FeatureSet& b);

/// Frechet distance between Gaussian fits; covariances get +1e-6 I.
double fid(const FeatureSet& a, const FeatureSet& b);

/// mean | sigma_i - |y_i - mu_i| |.
double mace(const Volume& mean, const Volume& std, const Volume& gt);

/// (pred - down) / (gt - down); NaN when gt == down.
double recovery_rate(double pred_score, double downsample_score, double gt_score);

/// Fixed random projection of the average-pooled volume. Pooling is finer
/// than the 4x degradation so that super-resolved detail stays visible.
class FeatureExtractor {
public:
    explicit FeatureExtractor(int dim = 128, std::uint64_t seed = 0x5EEDF00D, std::size_t pool = 2);

    std::vector<double> operator()(const Volume& v) const;
    int dim() const { return dim_; }

private:
    int dim_;
    std::uint64_t seed_;
    std::size_t pool_;
};

FeatureSet extract_features(const FeatureExtractor& fx, std::span<const Volume> volumes);

}  // namespace scorefusion
