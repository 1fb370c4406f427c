// Copyright 2026 The ScoreFusion Authors
// SPDX-License-Identifier: Apache-2.0

#include "scorefusion/metrics.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>

#include "scorefusion/errors.hpp"
#include "scorefusion/rng.hpp"

namespace scorefusion {
namespace {

void same_dims(const Volume& a, const Volume& b, const char* what) {
    if (a.dims() != b.dims()) {
        throw ShapeError(std::string(what) + ": dims differ, " + to_string(a.dims()) + " vs " + to_string(b.dims()));
    }
}

// Valid-mode separable filter of a C-order grid along one axis.
std::vector<double> filter_axis(const std::vector<double>& in, std::array<std::size_t, 3>& dims, int axis,
                                const std::vector<double>& k) {
    std::array<std::size_t, 3> od = dims;
    od[static_cast<std::size_t>(axis)] -= k.size() - 1;
    std::vector<double> out(od[0] * od[1] * od[2], 0.0);
    const std::size_t stride[3] = {dims[1] * dims[2], dims[2], 1};
    for (std::size_t i = 0; i < od[0]; ++i) {
        for (std::size_t j = 0; j < od[1]; ++j) {
            for (std::size_t l = 0; l < od[2]; ++l) {
                const std::size_t base = i * stride[0] + j * stride[1] + l * stride[2];
                double acc = 0.0;
                for (std::size_t q = 0; q < k.size(); ++q) acc += k[q] * in[base + q * stride[axis]];
                out[(i * od[1] + j) * od[2] + l] = acc;
            }
        }
    }
    dims = od;
    return out;
}

std::vector<double> gaussian_filter_valid(const std::vector<double>& in, const Dims& d, const std::vector<double>& k) {
    std::array<std::size_t, 3> dims{d.d1, d.d2, d.d3};
    auto r = filter_axis(in, dims, 0, k);
    r = filter_axis(r, dims, 1, k);
    return filter_axis(r, dims, 2, k);
}

Eigen::MatrixXd to_matrix(const FeatureSet& s) {
    if (s.empty()) throw ShapeError("feature set is empty");
    const auto d = s.front().size();
    Eigen::MatrixXd m(static_cast<Eigen::Index>(s.size()), static_cast<Eigen::Index>(d));
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (s[i].size() != d) throw ShapeError("feature vectors differ in length");
        for (std::size_t j = 0; j < d; ++j) m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = s[i][j];
    }
    return m;
}

Eigen::MatrixXd covariance(const Eigen::MatrixXd& x, const Eigen::RowVectorXd& mu) {
    const Eigen::MatrixXd c = x.rowwise() - mu;
    const double denom = x.rows() > 1 ? static_cast<double>(x.rows() - 1) : 1.0;
    return (c.transpose() * c) / denom;
}

Eigen::MatrixXd sqrt_psd(const Eigen::MatrixXd& m) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
    const Eigen::VectorXd ev = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

}  // namespace

double psnr(const Volume& pred, const Volume& gt) {
    same_dims(pred, gt, "psnr");
    double se = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const double e = static_cast<double>(pred[i]) - gt[i];
        se += e * e;
    }
    const double mse = se / static_cast<double>(pred.size());
    if (mse == 0.0) return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(1.0 / mse);
}

double ssim3d(const Volume& pred, const Volume& gt, const SsimParams& p) {
    same_dims(pred, gt, "ssim3d");
    const Dims d = pred.dims();
    const auto w = static_cast<std::size_t>(p.window);
    if (d.d1 < w || d.d2 < w || d.d3 < w) {
        throw ShapeError("ssim3d: volume " + to_string(d) + " smaller than the " + std::to_string(w) + "^3 window");
    }
    std::vector<double> k(w);
    double ks = 0.0;
    const double c = (static_cast<double>(w) - 1.0) / 2.0;
    for (std::size_t i = 0; i < w; ++i) {
        k[i] = std::exp(-((i - c) * (i - c)) / (2.0 * p.sigma * p.sigma));
        ks += k[i];
    }
    for (auto& v : k) v /= ks;

    const std::size_t n = pred.size();
    std::vector<double> x(n), y(n), xx(n), yy(n), xy(n);
    for (std::size_t i = 0; i < n; ++i) {
        x[i] = pred[i];
        y[i] = gt[i];
        xx[i] = x[i] * x[i];
        yy[i] = y[i] * y[i];
        xy[i] = x[i] * y[i];
    }
    const auto mx = gaussian_filter_valid(x, d, k);
    const auto my = gaussian_filter_valid(y, d, k);
    const auto mxx = gaussian_filter_valid(xx, d, k);
    const auto myy = gaussian_filter_valid(yy, d, k);
    const auto mxy = gaussian_filter_valid(xy, d, k);
    const double c1 = (p.k1 * p.data_range) * (p.k1 * p.data_range);
    const double c2 = (p.k2 * p.data_range) * (p.k2 * p.data_range);
    double acc = 0.0;
    for (std::size_t i = 0; i < mx.size(); ++i) {
        const double vx = mxx[i] - mx[i] * mx[i];
        const double vy = myy[i] - my[i] * my[i];
        const double cxy = mxy[i] - mx[i] * my[i];
        acc += ((2 * mx[i] * my[i] + c1) * (2 * cxy + c2)) /
               ((mx[i] * mx[i] + my[i] * my[i] + c1) * (vx + vy + c2));
    }
    return acc / static_cast<double>(mx.size());
}

double mmd(const FeatureSet& a, const FeatureSet& b) {
    const Eigen::MatrixXd A = to_matrix(a), B = to_matrix(b);
    if (A.cols() != B.cols()) throw ShapeError("mmd: feature dimensions differ");
    Eigen::MatrixXd Z(A.rows() + B.rows(), A.cols());
    Z << A, B;
    const Eigen::Index n = Z.rows(), na = A.rows();
    Eigen::MatrixXd D2(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < n; ++j) D2(i, j) = (Z.row(i) - Z.row(j)).squaredNorm();
    }
    std::vector<double> dist;
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = i + 1; j < n; ++j) dist.push_back(std::sqrt(D2(i, j)));
    }
    double h = 1.0;
    if (!dist.empty()) {
        auto mid = dist.begin() + static_cast<std::ptrdiff_t>(dist.size() / 2);
        std::nth_element(dist.begin(), mid, dist.end());
        h = *mid;
        if (dist.size() % 2 == 0) h = 0.5 * (h + *std::max_element(dist.begin(), mid));
        if (!(h > 0.0)) h = 1.0;
    }
    const Eigen::MatrixXd K = (-D2 / (2.0 * h * h)).array().exp().matrix();
    const Eigen::Index nb = n - na;
    const double kaa = K.topLeftCorner(na, na).mean();
    const double kbb = K.bottomRightCorner(nb, nb).mean();
    const double kab = K.topRightCorner(na, nb).mean();
    return std::max(0.0, kaa + kbb - 2.0 * kab);
}

double fid(const FeatureSet& a, const FeatureSet& b) {
    const Eigen::MatrixXd A = to_matrix(a), B = to_matrix(b);
    if (A.cols() != B.cols()) throw ShapeError("fid: feature dimensions differ");
    const Eigen::RowVectorXd ma = A.colwise().mean(), mb = B.colwise().mean();
    const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(A.cols(), A.cols());
    const Eigen::MatrixXd sa = covariance(A, ma) + 1e-6 * I;
    const Eigen::MatrixXd sb = covariance(B, mb) + 1e-6 * I;
    // Tr (Sa Sb)^1/2 = Tr (Sa^1/2 Sb Sa^1/2)^1/2, which keeps the solver symmetric.
    const Eigen::MatrixXd ha = sqrt_psd(sa);
    Eigen::MatrixXd m = ha * sb * ha;
    m = 0.5 * (m + m.transpose());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m, Eigen::EigenvaluesOnly);
    const double tr_sqrt = es.eigenvalues().cwiseMax(0.0).cwiseSqrt().sum();
    const double v = (ma - mb).squaredNorm() + sa.trace() + sb.trace() - 2.0 * tr_sqrt;
    return std::max(0.0, v);
}

double mace(const Volume& mean, const Volume& std, const Volume& gt) {
    same_dims(mean, gt, "mace");
    same_dims(std, gt, "mace");
    double acc = 0.0;
    for (std::size_t i = 0; i < gt.size(); ++i) {
        if (std[i] < 0.f) throw RangeError("mace: negative standard deviation");
        // Residual at voxel precision, so sigma = |y - mu| stored as float gives exactly 0.
        const float err = std::abs(gt[i] - mean[i]);
        acc += std::abs(static_cast<double>(std[i]) - static_cast<double>(err));
    }
    return acc / static_cast<double>(gt.size());
}

double recovery_rate(double pred_score, double downsample_score, double gt_score) {
    const double den = gt_score - downsample_score;
    if (den == 0.0) return std::numeric_limits<double>::quiet_NaN();
    return (pred_score - downsample_score) / den;
}

FeatureExtractor::FeatureExtractor(int dim, std::uint64_t seed, std::size_t pool)
    : dim_(dim), seed_(seed), pool_(pool) {
    if (dim < 1 || pool < 1) throw ConfigError("feature extractor needs dim >= 1 and pool >= 1");
}

std::vector<double> FeatureExtractor::operator()(const Volume& v) const {
    const Dims d = v.dims();
    const std::size_t p = pool_;
    const Dims pd{std::max<std::size_t>(d.d1 / p, 1), std::max<std::size_t>(d.d2 / p, 1),
                  std::max<std::size_t>(d.d3 / p, 1)};
    std::vector<double> pooled(pd.d1 * pd.d2 * pd.d3, 0.0);
    std::vector<int> counts(pooled.size(), 0);
    for (std::size_t i = 0; i < d.d1; ++i) {
        for (std::size_t j = 0; j < d.d2; ++j) {
            for (std::size_t k = 0; k < d.d3; ++k) {
                const std::size_t a = std::min(i / p, pd.d1 - 1), b = std::min(j / p, pd.d2 - 1),
                                  c = std::min(k / p, pd.d3 - 1);
                const std::size_t o = (a * pd.d2 + b) * pd.d3 + c;
                pooled[o] += v(i, j, k);
                ++counts[o];
            }
        }
    }
    for (std::size_t o = 0; o < pooled.size(); ++o) pooled[o] /= counts[o];
    const double scale = 1.0 / std::sqrt(static_cast<double>(pooled.size()));
    std::vector<double> f(static_cast<std::size_t>(dim_), 0.0);
    for (int r = 0; r < dim_; ++r) {
        Rng rng(derive_seed(seed_, static_cast<std::uint64_t>(r)));
        double acc = 0.0;
        for (double x : pooled) acc += rng.normal() * x;
        f[static_cast<std::size_t>(r)] = acc * scale;
    }
    return f;
}

FeatureSet extract_features(const FeatureExtractor& fx, std::span<const Volume> volumes) {
    FeatureSet out;
    out.reserve(volumes.size());
    for (const auto& v : volumes) out.push_back(fx(v));
    return out;
}

}  // namespace scorefusion
