#pragma once

// SO(3) machinery for attitude states: exponential and logarithm maps,
// composition and the geodesic L2 mean used for sigma-point statistics.

#include <Eigen/Core>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <span>
#include <vector>

#include "cascade/errors.hpp"

namespace cascade {

using Eigen::Matrix3d;
using Eigen::Vector3d;

inline Matrix3d skew(const Vector3d& v) {
    Matrix3d m;
    m << 0.0, -v.z(), v.y(),
         v.z(), 0.0, -v.x(),
         -v.y(), v.x(), 0.0;
    return m;
}

inline Vector3d vee(const Matrix3d& m) { return {m(2, 1), m(0, 2), m(1, 0)}; }

/// Orthogonal-drift tolerance that triggers a polar re-orthonormalization.
inline constexpr double kOrthonormalDrift = 1e-9;

/// Direction cosine matrix C_ab (maps body-frame coordinates to the absolute frame).
class Rotation3 {
public:
    Rotation3() : c_(Matrix3d::Identity()) {}

    /// Accepts any matrix within drift of SO(3); larger drift is projected back
    /// onto SO(3) with the polar decomposition.
    explicit Rotation3(const Matrix3d& c) : c_(c) { normalize(); }

    static Rotation3 identity() { return {}; }

    const Matrix3d& matrix() const { return c_; }
    Rotation3 inverse() const { return Rotation3(c_.transpose(), Trusted{}); }
    Vector3d operator*(const Vector3d& v) const { return c_ * v; }
    Rotation3 operator*(const Rotation3& other) const { return Rotation3(Matrix3d(c_ * other.c_)); }

    double orthonormal_drift() const {
        return (c_.transpose() * c_ - Matrix3d::Identity()).cwiseAbs().maxCoeff();
    }

private:
    struct Trusted {};
    Rotation3(const Matrix3d& c, Trusted) : c_(c) {}

    void normalize() {
        if (!c_.allFinite()) throw Error("Rotation3: non-finite matrix");
        if (orthonormal_drift() <= kOrthonormalDrift && c_.determinant() > 0.0) return;
        Eigen::JacobiSVD<Matrix3d> svd(c_, Eigen::ComputeFullU | Eigen::ComputeFullV);
        Matrix3d u = svd.matrixU();
        const Matrix3d v = svd.matrixV();
        if ((u * v.transpose()).determinant() < 0.0) u.col(2) *= -1.0;
        c_ = u * v.transpose();
    }

    Matrix3d c_;
};

/// Rodrigues formula; second-order series below 1e-8 rad.
inline Rotation3 exp_map(const Vector3d& phi) {
    const double angle = phi.norm();
    const Matrix3d k = skew(phi);
    if (angle < 1e-8) return Rotation3(Matrix3d(Matrix3d::Identity() + k + 0.5 * k * k));
    const double a = std::sin(angle) / angle;
    const double b = (1.0 - std::cos(angle)) / (angle * angle);
    return Rotation3(Matrix3d(Matrix3d::Identity() + a * k + b * k * k));
}

/// Rotation vector with norm in [0, pi].
inline Vector3d log_map(const Rotation3& rot) {
    const Matrix3d& c = rot.matrix();
    const double cos_angle = std::clamp(0.5 * (c.trace() - 1.0), -1.0, 1.0);
    const Vector3d w = 0.5 * vee(c - c.transpose());  // sin(angle)·axis
    const double sin_angle = w.norm();
    const double angle = std::atan2(sin_angle, cos_angle);

    if (sin_angle < 1e-12 && cos_angle > 0.0) return w;
    if (cos_angle > -0.99) return w * (angle / sin_angle);

    // Near pi the antisymmetric part vanishes; recover the axis from the
    // symmetric part, which equals cos(angle)·I + (1 − cos(angle))·a·aᵀ.
    const Matrix3d b = 0.5 * (c + c.transpose()) - cos_angle * Matrix3d::Identity();
    Eigen::Index j = 0;
    b.diagonal().maxCoeff(&j);
    Vector3d axis = b.col(j).normalized();
    if (axis.dot(w) < 0.0) axis = -axis;
    return angle * axis;
}

/// Attitude error convention for tangent-space uncertainty.
enum class AttitudeError {
    kWorld,  ///< C = Exp(δ)·C̄, error resolved in the absolute frame
    kBody,   ///< C = C̄·Exp(δ), error resolved in the estimated body frame
};

inline Rotation3 perturb(const Rotation3& mean, const Vector3d& delta, AttitudeError conv) {
    return conv == AttitudeError::kWorld ? exp_map(delta) * mean : mean * exp_map(delta);
}

/// Tangent error δ such that truth = perturb(estimate, δ).
inline Vector3d attitude_error(const Rotation3& estimate, const Rotation3& truth, AttitudeError conv) {
    return conv == AttitudeError::kWorld ? log_map(truth * estimate.inverse())
                                         : log_map(estimate.inverse() * truth);
}

/// Re-expresses a tangent covariance from one convention to the other at `mean`.
inline Matrix3d convert_attitude_cov(const Matrix3d& cov, const Rotation3& mean, AttitudeError from,
                                     AttitudeError to) {
    if (from == to) return cov;
    const Matrix3d& c = mean.matrix();
    // δ_world = C̄·δ_body
    return from == AttitudeError::kWorld ? Matrix3d(c.transpose() * cov * c) : Matrix3d(c * cov * c.transpose());
}

inline constexpr int kGeodesicMeanMaxIterations = 100;
inline constexpr double kGeodesicMeanTolerance = 1e-10;

/// Geodesic L2 mean: fixed point of C̄ ← C̄·Exp((1/N) Σ Log(C̄ᵀ·C_i)).
/// Starts from `initial`; any point inside the cluster works.
inline Rotation3 geodesic_mean(std::span<const Rotation3> rotations, const Rotation3& initial) {
    if (rotations.empty()) throw Error("geodesic_mean of an empty set");
    Rotation3 mean = initial;
    const double inv_n = 1.0 / static_cast<double>(rotations.size());
    for (int iter = 0; iter < kGeodesicMeanMaxIterations; ++iter) {
        Vector3d step = Vector3d::Zero();
        for (const auto& r : rotations) step += log_map(mean.inverse() * r);
        step *= inv_n;
        mean = mean * exp_map(step);
        if (step.norm() < kGeodesicMeanTolerance) return mean;
    }
    throw NoConvergence("geodesic_mean did not converge in 100 iterations");
}

inline Rotation3 geodesic_mean(std::span<const Rotation3> rotations) {
    if (rotations.empty()) throw Error("geodesic_mean of an empty set");
    return geodesic_mean(rotations, rotations.front());
}

inline Rotation3 geodesic_mean(const std::vector<Rotation3>& rotations) {
    return geodesic_mean(std::span<const Rotation3>(rotations));
}

}  // namespace cascade
