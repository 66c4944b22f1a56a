#pragma once

// Invariant-style attitude filter (gyro propagation, magnetometer and gated
// accelerometer aiding).
//
// Error convention: truth = Exp(δ)·C̄ with δ resolved in the absolute frame.
// Under this error the gyro propagation Jacobian is the identity and a body
// measurement y = Cᵀb + ν of a known reference b, rotated back as C̄·y − b,
// has the constant Jacobian skew(b). The feeding-filter Psi is therefore
// (I − G·H)ᵀ, and the identity is its steady-state approximation.

#include <cmath>
#include <limits>
#include <optional>

#include "cascade/filters/cascade.hpp"
#include "cascade/gaussian.hpp"
#include "cascade/so3.hpp"

namespace cascade {

using Matrix3 = Eigen::Matrix3d;

struct AttitudeEstimate {
    Rotation3 mean;
    Matrix3 cov = Matrix3::Identity();  // world-frame tangent covariance
    double since_accel = std::numeric_limits<double>::infinity();  // s since the last accelerometer update
};

struct AhrsParams {
    double gyro_std = 0.0032;         // rad/s, per sample
    double mag_std = 2.0;             // magnetometer units
    double accel_aiding_std = 12.0;   // m/s², lumps motion acceleration with sensor noise
    double accel_threshold = 0.5;     // m/s², gate on | ‖a‖ − ‖g‖ |
    double accel_min_interval = 0.0;  // s between accelerometer updates
    Vector3d gravity{0.0, 0.0, -9.81};
    Vector3d mag_reference{25.0, 0.0, -43.30127018922193};
    bool cooperate = false;           // emit the exact Psi with every output
};

/// Gyro strapdown over one interval: C̄ ← C̄·Exp(ω·dt), P ← P + (σ_g·dt)²·I.
inline AttitudeEstimate ahrs_propagate(const AttitudeEstimate& att, const Vector3d& gyro, double dt,
                                       const AhrsParams& p) {
    if (!(dt > 0.0)) throw ConfigError("ahrs_propagate: dt must be positive");
    const double s = p.gyro_std * dt;
    return {att.mean * exp_map(gyro * dt), att.cov + s * s * Matrix3::Identity(), att.since_accel + dt};
}

struct VectorAiding {
    AttitudeEstimate att;
    Matrix3 i_minus_gh;
};

/// Corrects with y = Cᵀ·reference + ν, ν ~ N(0, std²·I).
inline VectorAiding ahrs_correct_vector(const AttitudeEstimate& att, const Vector3d& y_body,
                                        const Vector3d& reference, double std) {
    const Matrix3 h = skew(reference);
    const Matrix3 r = std * std * Matrix3::Identity();
    const Vector3d z = att.mean * y_body - reference;
    const Matrix3 s = h * att.cov * h.transpose() + r;
    const Matrix3 g = right_solve_spd(att.cov * h.transpose(), s, "ahrs: innovation covariance");
    const Matrix3 i_gh = Matrix3::Identity() - g * h;
    Matrix3 cov = i_gh * att.cov * i_gh.transpose() + g * r * g.transpose();
    return {{exp_map(g * z) * att.mean, 0.5 * (cov + cov.transpose()), att.since_accel}, i_gh};
}

inline bool accel_gate_open(const Vector3d& accel, const AhrsParams& p) {
    return std::abs(accel.norm() - p.gravity.norm()) < p.accel_threshold;
}

struct AhrsStep {
    AttitudeEstimate att;
    FeedingOutput feeding;  // x2 = tangent error, mean zero about att.mean
    bool accel_used = false;
};

/// One AHRS cycle: propagate with the previous interval's gyro, then correct
/// with the magnetometer and, when the gate is open, the accelerometer.
inline AhrsStep ahrs_step(const AttitudeEstimate& att, const Vector3d& gyro, const std::optional<Vector3d>& accel,
                          const std::optional<Vector3d>& mag, double dt, const AhrsParams& p) {
    AttitudeEstimate cur = ahrs_propagate(att, gyro, dt, p);
    Matrix3 transition = Matrix3::Identity();
    if (mag) {
        auto up = ahrs_correct_vector(cur, *mag, p.mag_reference, p.mag_std);
        cur = up.att;
        transition = up.i_minus_gh * transition;
    }
    bool used = false;
    if (accel && accel_gate_open(*accel, p) && cur.since_accel >= p.accel_min_interval) {
        auto up = ahrs_correct_vector(cur, *accel, -p.gravity, p.accel_aiding_std);
        cur = up.att;
        cur.since_accel = 0.0;
        transition = up.i_minus_gh * transition;
        used = true;
    }
    FeedingOutput out{Gaussian(VectorXd::Zero(3), MatrixXd(cur.cov)), std::nullopt};
    if (p.cooperate) out.psi = MatrixXd(transition.transpose());
    return {cur, std::move(out), used};
}

}  // namespace cascade
