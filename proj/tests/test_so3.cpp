#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "cascade/gaussian.hpp"
#include "cascade/so3.hpp"
#include "test_support.hpp"

using namespace cascade;
using cascade::testing::max_abs;

namespace {

constexpr double kPi = std::numbers::pi;

Vector3d random_axis(std::mt19937_64& rng) {
    std::normal_distribution<double> n(0.0, 1.0);
    return Vector3d(n(rng), n(rng), n(rng)).normalized();
}

Rotation3 random_rotation(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> angle(0.0, kPi - 1e-3);
    return exp_map(angle(rng) * random_axis(rng));
}

}  // namespace

TEST(ExpMap, ZeroIsIdentity) { EXPECT_EQ(exp_map(Vector3d::Zero()).matrix(), Matrix3d::Identity()); }

TEST(ExpMap, QuarterTurnAboutX) {
    const Rotation3 r = exp_map(Vector3d(kPi / 2, 0, 0));
    EXPECT_LT(max_abs(r * Vector3d::UnitY() - Vector3d::UnitZ()), 1e-15);
    EXPECT_LT(max_abs(r * Vector3d::UnitZ() + Vector3d::UnitY()), 1e-15);
    EXPECT_LT(max_abs(r * Vector3d::UnitX() - Vector3d::UnitX()), 1e-15);
}

TEST(ExpMap, InverseSymmetry) {
    std::mt19937_64 rng(31);
    for (int i = 0; i < 200; ++i) {
        const Vector3d phi = 2.0 * random_axis(rng);
        EXPECT_LT(max_abs((exp_map(phi) * exp_map(-phi)).matrix() - Matrix3d::Identity()), 1e-14);
    }
}

TEST(ExpMap, SmallAngleSeriesMatchesRodrigues) {
    const Vector3d phi = 0.99e-8 * Vector3d(1, -2, 0.5).normalized();
    const double angle = phi.norm();
    const Matrix3d k = skew(phi);
    const Matrix3d rodrigues = Matrix3d::Identity() + std::sin(angle) / angle * k +
                               (1 - std::cos(angle)) / (angle * angle) * k * k;
    EXPECT_LT(max_abs(exp_map(phi).matrix() - rodrigues), 1e-15);
}

TEST(LogMap, IdentityIsZero) { EXPECT_EQ(log_map(Rotation3::identity()), Vector3d::Zero()); }

TEST(LogMap, RoundTripFixedVector) {
    const Vector3d phi(0.1, 0.2, -0.3);
    EXPECT_LT(max_abs(log_map(exp_map(phi)) - phi), 1e-10);
}

TEST(LogMap, HalfTurnAboutX) {
    Matrix3d c;
    c << 1, 0, 0, 0, -1, 0, 0, 0, -1;
    const Vector3d v = log_map(Rotation3(c));
    EXPECT_NEAR(v.norm(), kPi, 1e-12);
    EXPECT_NEAR(std::abs(v.x()), kPi, 1e-12);
}

TEST(LogMap, NearHalfTurnBranch) {
    std::mt19937_64 rng(32);
    for (int i = 0; i < 500; ++i) {
        const Vector3d phi = (kPi - 0.05 * (i + 1) / 500.0) * random_axis(rng);
        EXPECT_LT(max_abs(log_map(exp_map(phi)) - phi), 1e-9);
    }
}

TEST(So3Property, ExpLogRoundTrip) {
    std::mt19937_64 rng(33);
    std::uniform_real_distribution<double> angle(0.0, 3.0);
    for (int i = 0; i < 10000; ++i) {
        const Vector3d phi = angle(rng) * random_axis(rng);
        const Vector3d back = log_map(exp_map(phi));
        ASSERT_LT(max_abs(back - phi), 1e-9) << "angle " << phi.norm();
        ASSERT_LE(back.norm(), kPi + 1e-12);
    }
}

TEST(Rotation, ReorthonormalizesDrift) {
    Matrix3d c = exp_map(Vector3d(0.3, -0.2, 0.1)).matrix();
    c(0, 0) += 1e-6;
    const Rotation3 r(c);
    EXPECT_LE(r.orthonormal_drift(), 1e-12);
    EXPECT_GT(r.matrix().determinant(), 0.0);
    Matrix3d nan = Matrix3d::Identity();
    nan(1, 1) = std::nan("");
    EXPECT_THROW(Rotation3{nan}, Error);
}

TEST(Rotation, LongCompositionStaysOrthonormal) {
    std::mt19937_64 rng(34);
    Rotation3 r;
    for (int i = 0; i < 100000; ++i) r = r * exp_map(0.01 * random_axis(rng));
    EXPECT_LE(r.orthonormal_drift(), kOrthonormalDrift);
}

TEST(AttitudeErrorConvention, PerturbAndErrorAreInverse) {
    std::mt19937_64 rng(35);
    for (auto conv : {AttitudeError::kWorld, AttitudeError::kBody}) {
        for (int i = 0; i < 100; ++i) {
            const Rotation3 mean = random_rotation(rng);
            const Vector3d delta = 0.3 * random_axis(rng);
            EXPECT_LT(max_abs(attitude_error(mean, perturb(mean, delta, conv), conv) - delta), 1e-12);
        }
    }
}

TEST(AttitudeErrorConvention, CovarianceConversionMatchesSmallErrors) {
    std::mt19937_64 rng(36);
    const Rotation3 mean = random_rotation(rng);
    const Vector3d d_world(1e-6, -2e-6, 3e-6);
    const Vector3d d_body = attitude_error(mean, perturb(mean, d_world, AttitudeError::kWorld), AttitudeError::kBody);
    EXPECT_LT(max_abs(mean.matrix() * d_body - d_world), 1e-15);
    const Matrix3d p = Vector3d(1, 2, 3).asDiagonal();
    const Matrix3d there = convert_attitude_cov(p, mean, AttitudeError::kWorld, AttitudeError::kBody);
    const Matrix3d back = convert_attitude_cov(there, mean, AttitudeError::kBody, AttitudeError::kWorld);
    EXPECT_LT(max_abs(back - p), 1e-12);
}

TEST(GeodesicMean, IdenticalInputs) {
    std::mt19937_64 rng(37);
    const Rotation3 c = random_rotation(rng);
    const std::vector<Rotation3> rs(5, c);
    EXPECT_LT(max_abs(geodesic_mean(rs).matrix() - c.matrix()), 1e-14);
}

TEST(GeodesicMean, SymmetricPairAveragesToIdentity) {
    const Vector3d phi(0.2, -0.1, 0.4);
    const std::vector<Rotation3> rs{exp_map(phi), exp_map(-phi)};
    EXPECT_LT(max_abs(geodesic_mean(rs).matrix() - Matrix3d::Identity()), 1e-12);
}

TEST(GeodesicMean, ResidualVanishes) {
    std::mt19937_64 rng(38);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<Rotation3> rs;
        const Rotation3 base = random_rotation(rng);
        for (int i = 0; i < 3; ++i) rs.push_back(base * exp_map(0.3 * random_axis(rng)));
        const Rotation3 mean = geodesic_mean(rs);
        Vector3d residual = Vector3d::Zero();
        for (const auto& r : rs) residual += log_map(mean.inverse() * r);
        EXPECT_LT((residual / 3.0).norm(), 1e-9);
    }
}

TEST(GeodesicMean, EmptyThrows) { EXPECT_THROW(geodesic_mean(std::vector<Rotation3>{}), Error); }

TEST(GeodesicMeanProperty, LeftEquivariance) {
    std::mt19937_64 rng(39);
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<Rotation3> rs;
        std::vector<Rotation3> moved;
        const Rotation3 base = random_rotation(rng);
        const Rotation3 r = random_rotation(rng);
        for (int i = 0; i < 12; ++i) {
            rs.push_back(base * exp_map(0.5 * random_axis(rng)));
            moved.push_back(r * rs.back());
        }
        EXPECT_LT(max_abs(geodesic_mean(moved).matrix() - (r * geodesic_mean(rs)).matrix()), 1e-8);
    }
}

TEST(GeodesicMeanProperty, TangentCovarianceIsPsd) {
    std::mt19937_64 rng(40);
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<Rotation3> rs;
        for (int i = 0; i < 6; ++i) rs.push_back(exp_map(0.4 * random_axis(rng)));
        const Rotation3 mean = geodesic_mean(rs);
        Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(3, 3);
        for (const auto& r : rs) {
            const Vector3d e = log_map(mean.inverse() * r);
            cov += e * e.transpose() / 6.0;
        }
        EXPECT_LT(max_abs(cov - cov.transpose()), 1e-15);
        EXPECT_TRUE(is_psd(cov));
    }
}
