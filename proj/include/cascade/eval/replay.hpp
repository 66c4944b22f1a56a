#pragma once

// Runs the AHRS and the proposed sigma-point cascade over recorded IMU and
// UWB logs. Each UWB sample is applied at the first IMU tick at or after its
// timestamp; when several fall into one interval the latest wins.

#include <optional>
#include <vector>

#include "cascade/eval/io.hpp"
#include "cascade/filters/ahrs.hpp"
#include "cascade/filters/cascade.hpp"
#include "cascade/scenarios/imu_uwb.hpp"

namespace cascade {

/// Attitude whose body axes map the body-frame observations of two
/// non-parallel reference vectors onto them; the first pair is matched exactly.
inline Rotation3 triad(const Vector3d& body1, const Vector3d& body2, const Vector3d& ref1, const Vector3d& ref2) {
    const auto frame = [](const Vector3d& a, const Vector3d& b) {
        const Vector3d t1 = a.normalized();
        const Vector3d cross = a.cross(b);
        if (cross.norm() < 1e-9 * a.norm() * b.norm()) throw ConfigError("triad: reference vectors are parallel");
        const Vector3d t2 = cross.normalized();
        Matrix3d m;
        m << t1, t2, t1.cross(t2);
        return m;
    };
    return Rotation3(Matrix3d(frame(ref1, ref2) * frame(body1, body2).transpose()));
}

struct ReplayRow {
    double t;
    Rotation3 att;
    Matrix3d att_cov;
    std::optional<Gaussian> x1;  // [r; v], present once the first UWB fix has arrived
};

inline std::vector<ReplayRow> run_replay(const std::vector<ImuLogRow>& imu, const std::vector<UwbLogRow>& uwb,
                                         const NonlinearConfig& cfg, const CascadeOptions& opts = {}) {
    cfg.validate();
    if (imu.size() < 2) throw ConfigError("replay: the IMU log needs at least two samples");
    const AhrsParams params = cfg.ahrs_params(false);
    const double av = cfg.init_att_std * cfg.init_att_std;

    AttitudeEstimate att{triad(imu[0].accel, imu[0].mag, -cfg.gravity, cfg.mag_reference), av * Matrix3d::Identity()};
    FeedingOutput feeding_prev{Gaussian(VectorXd::Zero(3), MatrixXd(att.cov)), std::nullopt};
    std::optional<CascadeBelief> belief;

    std::vector<ReplayRow> out;
    out.reserve(imu.size());
    out.push_back({imu[0].t, att.mean, att.cov, std::nullopt});
    std::size_t next_uwb = 0;
    while (next_uwb < uwb.size() && uwb[next_uwb].t <= imu[0].t) ++next_uwb;

    for (std::size_t k = 1; k < imu.size(); ++k) {
        const double dt = imu[k].t - imu[k - 1].t;
        std::optional<Vector3d> fix;
        while (next_uwb < uwb.size() && uwb[next_uwb].t <= imu[k].t) fix = uwb[next_uwb++].pos;

        const Rotation3 att_prev = att.mean;
        AhrsStep step = ahrs_step(att, imu[k - 1].gyro, imu[k].accel, imu[k].mag, dt, params);
        att = step.att;

        if (belief) {
            const CascadeModel model = imu_uwb_sigma_model(att_prev, imu[k - 1].accel, att.mean, dt, cfg);
            const std::optional<VectorXd> y = fix ? std::optional<VectorXd>(VectorXd(*fix)) : std::nullopt;
            belief = cascade_step(*belief, feeding_prev, step.feeding, y, model, opts);
        } else if (fix) {
            VectorXd mean(6);
            mean << *fix - att.mean * cfg.lever_arm, Vector3d::Zero();
            VectorXd var(6);
            const double pv = cfg.posmeas_std * cfg.posmeas_std;
            const double vv = cfg.init_vel_std * cfg.init_vel_std;
            var << pv, pv, pv, vv, vv, vv;
            belief = CascadeBelief::uncorrelated(Gaussian(mean, MatrixXd(var.asDiagonal())), 3);
        }
        feeding_prev = std::move(step.feeding);
        out.push_back({imu[k].t, att.mean, att.cov,
                       belief ? std::optional<Gaussian>(belief->x1) : std::nullopt});
    }
    return out;
}

inline void write_replay_attitude(const std::vector<ReplayRow>& rows, const std::filesystem::path& path) {
    using detail::fmt_double;
    auto out = detail::open_out(path);
    out << "t,rx,ry,rz,sx,sy,sz\n";
    for (const auto& r : rows) {
        const Vector3d phi = log_map(r.att);
        out << fmt_double(r.t);
        for (int i = 0; i < 3; ++i) out << ',' << fmt_double(phi(i));
        for (int i = 0; i < 3; ++i) out << ',' << fmt_double(std::sqrt(r.att_cov(i, i)));
        out << '\n';
    }
}

inline void write_replay_position(const std::vector<ReplayRow>& rows, const std::filesystem::path& path) {
    using detail::fmt_double;
    auto out = detail::open_out(path);
    out << "t,px,py,pz,vx,vy,vz,spx,spy,spz,svx,svy,svz\n";
    for (const auto& r : rows) {
        if (!r.x1) continue;
        out << fmt_double(r.t);
        for (int i = 0; i < 6; ++i) out << ',' << fmt_double(r.x1->mean()(i));
        for (int i = 0; i < 6; ++i) out << ',' << fmt_double(std::sqrt(r.x1->cov()(i, i)));
        out << '\n';
    }
}

}  // namespace cascade
