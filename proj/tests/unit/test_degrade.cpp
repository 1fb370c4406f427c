// Copyright 2026 The ScoreFusion Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest/doctest.h>

#include <Eigen/Dense>
#include <cmath>

#include "scorefusion/degrade.hpp"
#include "scorefusion/errors.hpp"
#include "scorefusion/rng.hpp"

using namespace scorefusion;

namespace {

Volume random_volume(Dims d, Rng& rng, double scale = 1.0) {
    Volume v(d);
    for (auto& x : v.storage()) x = static_cast<float>(scale * rng.normal());
    return v;
}

// Dense operator on one 4x4x4 block: every row is 1/64 everywhere.
Eigen::MatrixXd dense_block_operator() { return Eigen::MatrixXd::Constant(64, 64, 1.0 / 64.0); }

Eigen::VectorXd block(const Volume& v, std::size_t bi, std::size_t bj, std::size_t bk) {
    Eigen::VectorXd out(64);
    int n = 0;
    for (std::size_t i = 0; i < 4; ++i)
        for (std::size_t j = 0; j < 4; ++j)
            for (std::size_t k = 0; k < 4; ++k) out(n++) = v(4 * bi + i, 4 * bj + j, 4 * bk + k);
    return out;
}

double max_abs(const Volume& a, const Volume& b) {
    double m = 0.0;
    for (std::size_t n = 0; n < a.size(); ++n) m = std::max(m, std::abs(static_cast<double>(a[n]) - b[n]));
    return m;
}

}  // namespace

TEST_CASE("average pooling agrees with the dense block operator") {
    Rng rng(1);
    const Volume y = random_volume({8, 8, 8}, rng);
    const Volume ay = apply(DegradationOperator::avg_pool(4), y);
    const Eigen::MatrixXd A = dense_block_operator();
    for (std::size_t bi = 0; bi < 2; ++bi)
        for (std::size_t bj = 0; bj < 2; ++bj)
            for (std::size_t bk = 0; bk < 2; ++bk) {
                const Eigen::VectorXd expect = A * block(y, bi, bj, bk);
                const Eigen::VectorXd got = block(ay, bi, bj, bk);
                CHECK((expect - got).cwiseAbs().maxCoeff() < 1e-6);
            }
}

TEST_CASE("the dense oracle operator is an orthogonal projector") {
    const Eigen::MatrixXd A = dense_block_operator();
    CHECK((A * A - A).cwiseAbs().maxCoeff() < 1e-15);
    CHECK((A - A.transpose()).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("degradation is idempotent") {
    Rng rng(2);
    const auto op = DegradationOperator::avg_pool(4);
    const Volume y = random_volume({8, 16, 8}, rng);
    const Volume a = apply(op, y);
    CHECK(max_abs(apply(op, a), a) < 1e-6);
    CHECK(apply(DegradationOperator::identity(), y) == y);
}

TEST_CASE("degradation rejects dims that the factor does not divide") {
    Volume y({8, 8, 6});
    CHECK_THROWS_AS(apply(DegradationOperator::avg_pool(4), y), ShapeError);
}

TEST_CASE("consistency projection matches the dense oracle and is idempotent") {
    Rng rng(3);
    const auto op = DegradationOperator::avg_pool(4);
    const Volume x = apply(op, random_volume({8, 8, 8}, rng));
    const Volume y = random_volume({8, 8, 8}, rng);
    const Volume p = project_consistency(op, y, x);
    CHECK(consistency_residual(op, p, x) <= 1e-5);
    CHECK(max_abs(project_consistency(op, p, x), p) <= 1e-6);

    // Oracle: y - A y + x per block with the dense matrix.
    const Eigen::MatrixXd A = dense_block_operator();
    for (std::size_t bi = 0; bi < 2; ++bi)
        for (std::size_t bj = 0; bj < 2; ++bj)
            for (std::size_t bk = 0; bk < 2; ++bk) {
                const Eigen::VectorXd yb = block(y, bi, bj, bk);
                const Eigen::VectorXd expect = yb - A * yb + block(x, bi, bj, bk);
                CHECK((expect - block(p, bi, bj, bk)).cwiseAbs().maxCoeff() < 1e-5);
            }
}

TEST_CASE("consistency projection is a bitwise fixed point at any magnitude") {
    const auto op = DegradationOperator::avg_pool(4);
    for (double scale : {1.0, 100.0, 1e4}) {
        Rng rng(static_cast<std::uint64_t>(scale));
        const Volume x = apply(op, random_volume({8, 8, 8}, rng));
        const Volume p = project_consistency(op, random_volume({8, 8, 8}, rng, scale), x);
        const Volume q = project_consistency(op, p, x);
        CHECK(q.storage() == p.storage());
        CHECK(consistency_residual(op, p, x) <= 1e-5);
    }
}

TEST_CASE("consistency projection refuses conditions outside the range of A") {
    Rng rng(4);
    const auto op = DegradationOperator::avg_pool(4);
    const Volume x = random_volume({8, 8, 8}, rng);
    CHECK_THROWS_AS(project_consistency(op, x, x), ConsistencyDomainError);
}

TEST_CASE("boxed projection is consistent and stays in the box") {
    Rng rng(5);
    const auto op = DegradationOperator::avg_pool(4);
    Volume gt({8, 8, 8});
    for (auto& v : gt.storage()) v = static_cast<float>(rng.uniform(-1.0, 1.0));
    const Volume x = apply(op, gt);
    const Volume y = random_volume({8, 8, 8}, rng, 3.0);
    const Volume p = project_consistency_boxed(op, y, x, kModelRange);
    CHECK(consistency_residual(op, p, x) <= 1e-5);
    for (float v : p.storage()) {
        CHECK(v >= -1.f);
        CHECK(v <= 1.f);
    }
    // Inside the box it reduces to the plain projection.
    const Volume small = random_volume({8, 8, 8}, rng, 0.01);
    Volume near = gt;
    for (std::size_t n = 0; n < near.size(); ++n) near[n] = 0.5f * gt[n] + small[n];
    const Volume x2 = apply(op, near);
    const Volume q = project_consistency(op, near, x2);
    CHECK(max_abs(project_consistency_boxed(op, near, x2, kModelRange), q) < 1e-5);
}
