#pragma once

// Full-state cubature filter over (C, r, v) with a 9-dim tangent covariance
// ordered [δθ, δr, δv]. Attitude errors follow the AHRS convention
// truth = Exp(δθ)·C̄; attitude means come from the geodesic L2 mean.

#include <optional>
#include <vector>

#include "cascade/gaussian.hpp"
#include "cascade/sigma_points.hpp"
#include "cascade/so3.hpp"

namespace cascade {

struct FullState {
    Rotation3 att;
    Vector3d pos = Vector3d::Zero();
    Vector3d vel = Vector3d::Zero();
    MatrixXd cov = MatrixXd::Identity(9, 9);
};

struct FullSpkfParams {
    double gyro_std = 0.0032;  // rad/s, per sample
    double accel_std = 0.10;   // m/s², per sample
    double mag_std = 2.0;
    double uwb_std = 0.22;     // m
    Vector3d gravity{0.0, 0.0, -9.81};
    Vector3d mag_reference{25.0, 0.0, -43.30127018922193};
    Vector3d lever_arm{0.84, 0.0, 0.0};  // tag position in the body frame
};

/// Propagates through one IMU interval with gyro and accelerometer noise as
/// augmented sigma-point dimensions (15 in total).
inline FullState full_spkf_predict(const FullState& s, const Vector3d& gyro, const Vector3d& accel, double dt,
                                   const FullSpkfParams& p) {
    if (s.cov.rows() != 9 || s.cov.cols() != 9) throw DimensionMismatch("full filter covariance must be 9x9");
    MatrixXd aug = MatrixXd::Zero(15, 15);
    aug.topLeftCorner(9, 9) = s.cov;
    aug.block(9, 9, 3, 3) = p.gyro_std * p.gyro_std * Eigen::Matrix3d::Identity();
    aug.block(12, 12, 3, 3) = p.accel_std * p.accel_std * Eigen::Matrix3d::Identity();
    const SigmaPointSet pts = cubature_points(Gaussian(VectorXd::Zero(15), aug));

    const std::size_t n = pts.size();
    std::vector<Rotation3> rots;
    std::vector<VectorXd> pv;
    rots.reserve(n);
    pv.reserve(n);
    for (const auto& d : pts.points) {
        const Rotation3 c = exp_map(d.head<3>()) * s.att;
        const Vector3d r = s.pos + d.segment<3>(3);
        const Vector3d v = s.vel + d.segment<3>(6);
        const Vector3d a = c * Vector3d(accel - d.segment<3>(12)) + p.gravity;
        rots.push_back(c * exp_map((gyro - d.segment<3>(9)) * dt));
        VectorXd x(6);
        x << r + v * dt + 0.5 * a * dt * dt, v + a * dt;
        pv.push_back(std::move(x));
    }

    const Rotation3 mean_att = geodesic_mean(rots, s.att * exp_map(gyro * dt));
    VectorXd shift = VectorXd::Zero(6);
    for (const auto& x : pv) shift += x - pv.front();
    const VectorXd mean_pv = pv.front() + shift / static_cast<double>(n);

    MatrixXd cov = MatrixXd::Zero(9, 9);
    const Rotation3 inv_mean = mean_att.inverse();
    VectorXd dev(9);
    for (std::size_t i = 0; i < n; ++i) {
        dev << log_map(rots[i] * inv_mean), pv[i] - mean_pv;
        cov.noalias() += dev * dev.transpose();
    }
    cov /= static_cast<double>(n);
    return {mean_att, mean_pv.head<3>(), mean_pv.tail<3>(), symmetrize(cov)};
}

/// Joint cubature update with any subset of {magnetometer, UWB tag position}.
inline FullState full_spkf_correct(const FullState& s, const std::optional<Vector3d>& mag,
                                   const std::optional<Vector3d>& uwb, const FullSpkfParams& p) {
    if (!mag && !uwb) return s;
    const Index m = (mag ? 3 : 0) + (uwb ? 3 : 0);
    VectorXd y(m);
    VectorXd r_diag(m);
    Index at = 0;
    if (mag) {
        y.segment<3>(at) = *mag;
        r_diag.segment<3>(at).setConstant(p.mag_std * p.mag_std);
        at += 3;
    }
    if (uwb) {
        y.segment<3>(at) = *uwb;
        r_diag.segment<3>(at).setConstant(p.uwb_std * p.uwb_std);
    }

    const SigmaPointSet pts = cubature_points(Gaussian(VectorXd::Zero(9), s.cov));
    const auto h = [&](const VectorXd& d) -> VectorXd {
        const Rotation3 c = exp_map(d.head<3>()) * s.att;
        VectorXd out(m);
        Index k = 0;
        if (mag) {
            out.segment<3>(k) = c.inverse() * p.mag_reference;
            k += 3;
        }
        if (uwb) out.segment<3>(k) = s.pos + d.segment<3>(3) + c * p.lever_arm;
        return out;
    };
    const auto res = transform(pts, h, {{"x", 0, 9}});
    const MatrixXd innov_cov = res.cov + MatrixXd(r_diag.asDiagonal());
    const MatrixXd k = right_solve_spd(res.cross("x"), innov_cov, "full filter: innovation covariance");
    const VectorXd dx = k * (y - res.mean);
    MatrixXd cov = s.cov - k * innov_cov * k.transpose();
    return {exp_map(dx.head<3>()) * s.att, s.pos + dx.segment<3>(3), s.vel + dx.segment<3>(6), symmetrize(cov)};
}

/// Predict with the previous interval's IMU sample, then correct with the
/// measurements available at the new tick.
inline FullState full_spkf_step(const FullState& s, const Vector3d& gyro, const Vector3d& accel,
                                const std::optional<Vector3d>& mag, const std::optional<Vector3d>& uwb, double dt,
                                const FullSpkfParams& p) {
    return full_spkf_correct(full_spkf_predict(s, gyro, accel, dt, p), mag, uwb, p);
}

}  // namespace cascade
