#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "cascade/sigma_points.hpp"
#include "test_support.hpp"

using namespace cascade;
using cascade::testing::max_abs;
using cascade::testing::random_matrix;
using cascade::testing::random_spd;
using cascade::testing::random_vector;

namespace {

Gaussian scalar(double mean, double var) { return {VectorXd::Constant(1, mean), MatrixXd::Constant(1, 1, var)}; }

}  // namespace

TEST(Cubature, UnitScalar) {
    const auto pts = cubature_points(scalar(0, 1));
    ASSERT_EQ(pts.size(), 2u);
    EXPECT_EQ(pts.points[0](0), 1.0);
    EXPECT_EQ(pts.points[1](0), -1.0);
}

TEST(Cubature, StandardPlanar) {
    const auto pts = cubature_points(Gaussian::standard(2));
    ASSERT_EQ(pts.size(), 4u);
    const double s = std::sqrt(2.0);
    EXPECT_LT(max_abs(pts.points[0] - s * VectorXd::Unit(2, 0)), 1e-15);
    EXPECT_LT(max_abs(pts.points[1] - s * VectorXd::Unit(2, 1)), 1e-15);
    EXPECT_LT(max_abs(pts.points[2] + s * VectorXd::Unit(2, 0)), 1e-15);
    EXPECT_LT(max_abs(pts.points[3] + s * VectorXd::Unit(2, 1)), 1e-15);
}

TEST(Cubature, ScalarSymmetry) {
    const auto pts = cubature_points(scalar(3.0, 0.25));
    EXPECT_DOUBLE_EQ(pts.points[0](0), 3.5);
    EXPECT_DOUBLE_EQ(pts.points[1](0), 2.5);
}

TEST(Cubature, IndefiniteInputThrows) {
    MatrixXd bad(2, 2);
    bad << 1, 3, 3, 1;
    EXPECT_THROW(cubature_points(Gaussian(VectorXd::Zero(2), bad)), NotPositiveDefinite);
}

TEST(CubatureProperty, SampleMomentsMatchSource) {
    std::mt19937_64 rng(21);
    for (int trial = 0; trial < 200; ++trial) {
        const Index n = 1 + trial % 9;
        const Gaussian g(random_vector(rng, n), random_spd(rng, n));
        const auto pts = cubature_points(g);
        ASSERT_EQ(pts.size(), static_cast<std::size_t>(2 * n));
        VectorXd mean = VectorXd::Zero(n);
        for (const auto& s : pts.points) mean += s;
        mean /= static_cast<double>(pts.size());
        EXPECT_LE(max_abs(mean - g.mean()), 1e-10 * (1 + max_abs(g.mean())));
        MatrixXd cov = MatrixXd::Zero(n, n);
        for (const auto& s : pts.points) cov += (s - g.mean()) * (s - g.mean()).transpose();
        cov /= static_cast<double>(pts.size());
        EXPECT_LE(max_abs(cov - g.cov()), 1e-9 * max_abs(g.cov()));
    }
}

TEST(Transform, DoublingScalar) {
    const auto pts = cubature_points(scalar(1, 4));
    const auto r = transform(pts, [](const VectorXd& x) -> VectorXd { return 2.0 * x; }, {{"x", 0, 1}});
    EXPECT_NEAR(r.mean(0), 2.0, 1e-14);
    EXPECT_NEAR(r.cov(0, 0), 16.0, 1e-13);
    EXPECT_NEAR(r.cross("x")(0, 0), 8.0, 1e-13);
}

TEST(Transform, SquareOfStandardScalar) {
    // Points ±1 both map to 1.
    const auto pts = cubature_points(scalar(0, 1));
    const auto r = transform(pts, [](const VectorXd& x) -> VectorXd { return x.array().square(); });
    EXPECT_EQ(r.mean(0), 1.0);
    EXPECT_EQ(r.cov(0, 0), 0.0);
}

TEST(Transform, IdentityReproducesInput) {
    std::mt19937_64 rng(22);
    const Gaussian g(random_vector(rng, 5), random_spd(rng, 5));
    const auto r = transform(cubature_points(g), [](const VectorXd& x) { return x; }, {{"all", 0, 5}});
    EXPECT_LT(max_abs(r.mean - g.mean()), 1e-10);
    EXPECT_LT(max_abs(r.cov - g.cov()), 1e-10);
    EXPECT_LT(max_abs(r.cross("all") - g.cov()), 1e-10);
}

TEST(Transform, VaryingOutputSizeThrows) {
    const auto pts = cubature_points(Gaussian::standard(2));
    int calls = 0;
    EXPECT_THROW(transform(pts, [&](const VectorXd&) { return VectorXd::Zero(1 + (calls++ % 2)).eval(); }),
                 DimensionMismatch);
}

TEST(Transform, BlockOutsideInputThrows) {
    const auto pts = cubature_points(Gaussian::standard(2));
    EXPECT_THROW(transform(pts, [](const VectorXd& x) { return x; }, {{"bad", 1, 2}}), DimensionMismatch);
    const auto r = transform(pts, [](const VectorXd& x) { return x; });
    EXPECT_THROW(r.cross("missing"), DimensionMismatch);
}

TEST(TransformProperty, AffineExactness) {
    std::mt19937_64 rng(23);
    for (int trial = 0; trial < 200; ++trial) {
        const Index n = 1 + trial % 7;
        const Index m = 1 + (trial / 7) % 5;
        const Gaussian g(random_vector(rng, n), random_spd(rng, n));
        const MatrixXd a = random_matrix(rng, m, n);
        const VectorXd b = random_vector(rng, m);
        const auto r = transform(cubature_points(g), [&](const VectorXd& x) -> VectorXd { return a * x + b; },
                                 {{"x", 0, n}});
        const VectorXd mean_ref = a * g.mean() + b;
        const MatrixXd cov_ref = a * g.cov() * a.transpose();
        const MatrixXd cross_ref = g.cov() * a.transpose();
        EXPECT_LE(max_abs(r.mean - mean_ref), 1e-9 * (1 + max_abs(mean_ref)));
        EXPECT_LE(max_abs(r.cov - cov_ref), 1e-9 * (1 + max_abs(cov_ref)));
        EXPECT_LE(max_abs(r.cross("x") - cross_ref), 1e-9 * (1 + max_abs(cross_ref)));
        EXPECT_TRUE(is_psd(r.cov));
    }
}

TEST(TransformProperty, ConstantFunctionHasZeroCovariance) {
    std::mt19937_64 rng(24);
    for (int trial = 0; trial < 50; ++trial) {
        const Index n = 1 + trial % 6;
        const Gaussian g(random_vector(rng, n), random_spd(rng, n));
        const VectorXd c = random_vector(rng, 3);
        const auto r = transform(cubature_points(g), [&](const VectorXd&) { return c; });
        EXPECT_EQ(r.cov, MatrixXd::Zero(3, 3));
    }
}

TEST(TransformProperty, PermutationInvariance) {
    std::mt19937_64 rng(25);
    for (int trial = 0; trial < 50; ++trial) {
        const Index n = 2 + trial % 5;
        const Gaussian g(random_vector(rng, n), random_spd(rng, n));
        auto pts = cubature_points(g);
        auto f = [](const VectorXd& x) -> VectorXd {
            VectorXd y(2);
            y << std::sin(x(0)) * x(1), x.squaredNorm();
            return y;
        };
        const auto ref = transform(pts, f, {{"x", 0, n}});
        std::shuffle(pts.points.begin(), pts.points.end(), rng);
        const auto perm = transform(pts, f, {{"x", 0, n}});
        EXPECT_LT(max_abs(perm.mean - ref.mean), 1e-12 * (1 + max_abs(ref.mean)));
        EXPECT_LT(max_abs(perm.cov - ref.cov), 1e-12 * (1 + max_abs(ref.cov)));
        EXPECT_LT(max_abs(perm.cross("x") - ref.cross("x")), 1e-12 * (1 + max_abs(ref.cross("x"))));
    }
}
