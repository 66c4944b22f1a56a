#pragma once

// Rigid body with an IMU (gyro, accelerometer, magnetometer) and a UWB tag on
// a lever arm. The position filter state is [r; v]; the AHRS supplies the
// attitude.
//
// Sample conventions at tick k (t_k = k·dt):
//   imu[k].gyro, imu[k].accel  describe the interval [t_k, t_{k+1}]
//   imu[k].mag, uwb[k]         are taken at t_k
// Truth attitude integrates the interval-midpoint rate exactly,
// C_{k+1} = C_k·Exp(ω(t_k + dt/2)·dt), and the accelerometer reports the
// interval-mean specific force resolved in the body frame at t_k.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <random>
#include <vector>

#include "cascade/filters/ahrs.hpp"
#include "cascade/filters/cascade.hpp"
#include "cascade/filters/full_spkf.hpp"
#include "cascade/filters/linearized.hpp"
#include "cascade/so3.hpp"

namespace cascade {

struct TrajectoryConfig {
    Vector3d pos_center{0.0, 0.0, 1.5};
    Vector3d pos_amplitude{2.5, 2.0, 1.0};  // spans roughly 5 x 4 x 2 m
    Vector3d pos_freq_hz{0.1, 0.1, 0.1};
    Vector3d pos_phase{0.0, 0.5, 1.0};
    Vector3d omega_amplitude{0.5, 0.5, 0.5};  // rad/s, body frame
    Vector3d omega_freq_hz{0.13, 0.21, 0.29};
    Vector3d omega_phase{0.0, 1.0, 2.0};

    Vector3d position(double t) const { return pos_center + pos_amplitude.cwiseProduct(sines(t, pos_freq_hz, pos_phase)); }
    Vector3d velocity(double t) const {
        return pos_amplitude.cwiseProduct(two_pi_f(pos_freq_hz)).cwiseProduct(cosines(t, pos_freq_hz, pos_phase));
    }
    Vector3d angular_velocity(double t) const {
        return omega_amplitude.cwiseProduct(sines(t, omega_freq_hz, omega_phase));
    }

private:
    static Vector3d two_pi_f(const Vector3d& f) { return 2.0 * std::numbers::pi * f; }
    static Vector3d sines(double t, const Vector3d& f, const Vector3d& ph) {
        const Vector3d a = two_pi_f(f) * t + ph;
        return {std::sin(a.x()), std::sin(a.y()), std::sin(a.z())};
    }
    static Vector3d cosines(double t, const Vector3d& f, const Vector3d& ph) {
        const Vector3d a = two_pi_f(f) * t + ph;
        return {std::cos(a.x()), std::cos(a.y()), std::cos(a.z())};
    }
};

inline Vector3d default_mag_reference() {
    const double dip = 60.0 * std::numbers::pi / 180.0;
    return 50.0 * Vector3d(std::cos(dip), 0.0, -std::sin(dip));
}

struct NonlinearConfig {
    double accel_std = 0.10;      // m/s²
    double gyro_std = 0.0032;     // rad/s
    double mag_std = 2.00;        // magnetometer units (reference magnitude 50)
    double posmeas_std = 0.22;    // m
    double init_pos_std = 0.45;   // m
    double init_vel_std = 0.45;   // m/s
    double init_att_std = 0.22;   // rad
    double imu_rate = 100.0;      // Hz
    double posmeas_rate = 50.0;   // Hz
    double duration = 60.0;       // s
    Vector3d lever_arm{0.84, 0.0, 0.0};
    Vector3d gravity{0.0, 0.0, -9.81};
    Vector3d mag_reference = default_mag_reference();
    double accel_threshold = 0.5;        // m/s²
    double ahrs_accel_aiding_std = 12.0;  // m/s², covers gated-through motion acceleration
    double ahrs_accel_min_interval = 0.0;  // s
    TrajectoryConfig trajectory;

    int ticks() const { return static_cast<int>(std::lround(duration * imu_rate)); }
    double dt() const { return 1.0 / imu_rate; }
    int posmeas_every() const { return static_cast<int>(std::lround(imu_rate / posmeas_rate)); }

    /// Filters need strictly positive noise; the simulator alone accepts zeros.
    void validate(bool allow_zero_noise = false) const {
        if (!(imu_rate > 0.0 && posmeas_rate > 0.0)) throw ConfigError("rates must be positive");
        if (posmeas_rate > imu_rate) throw ConfigError("posmeas_rate must not exceed imu_rate");
        if (std::abs(imu_rate / posmeas_rate - posmeas_every()) > 1e-9) {
            throw ConfigError("imu_rate must be an integer multiple of posmeas_rate");
        }
        if (!(duration > 0.0) || ticks() < 1) throw ConfigError("duration must cover at least one IMU tick");
        for (double s : {accel_std, gyro_std, mag_std, posmeas_std, init_pos_std, init_vel_std, init_att_std}) {
            if (allow_zero_noise ? !(s >= 0.0) : !(s > 0.0)) {
                throw ConfigError(allow_zero_noise ? "standard deviations must be non-negative"
                                                   : "standard deviations must be positive");
            }
        }
        if (!(accel_threshold > 0.0) || !(ahrs_accel_aiding_std > 0.0)) {
            throw ConfigError("accel_threshold and ahrs_accel_aiding_std must be positive");
        }
        if (!(ahrs_accel_min_interval >= 0.0)) throw ConfigError("ahrs_accel_min_interval must be non-negative");
        if (!(mag_reference.norm() > 0.0)) throw ConfigError("mag_reference must be non-zero");
    }

    AhrsParams ahrs_params(bool cooperate = false) const {
        AhrsParams p;
        p.gyro_std = gyro_std;
        p.mag_std = mag_std;
        p.accel_aiding_std = ahrs_accel_aiding_std;
        p.accel_threshold = accel_threshold;
        p.accel_min_interval = ahrs_accel_min_interval;
        p.gravity = gravity;
        p.mag_reference = mag_reference;
        p.cooperate = cooperate;
        return p;
    }

    FullSpkfParams full_params() const {
        FullSpkfParams p;
        p.gyro_std = gyro_std;
        p.accel_std = accel_std;
        p.mag_std = mag_std;
        p.uwb_std = posmeas_std;
        p.gravity = gravity;
        p.mag_reference = mag_reference;
        p.lever_arm = lever_arm;
        return p;
    }
};

struct TruthSample {
    Rotation3 att;
    Vector3d pos;
    Vector3d vel;
};

struct ImuSample {
    Vector3d gyro;
    Vector3d accel;
    Vector3d mag;
};

/// Ticks 0..K. Initial estimates are truth minus a draw from the prior.
struct NonlinearTrial {
    std::uint64_t seed = 0;
    double dt = 0.01;
    std::vector<TruthSample> truth;
    std::vector<ImuSample> imu;
    std::vector<std::optional<Vector3d>> uwb;
    Rotation3 init_att;
    Vector3d init_pos = Vector3d::Zero();
    Vector3d init_vel = Vector3d::Zero();
};

inline NonlinearTrial simulate_nonlinear_trial(const NonlinearConfig& cfg, std::uint64_t seed) {
    cfg.validate(true);
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> n01(0.0, 1.0);
    const auto draw = [&](double std) { return Vector3d(std * n01(rng), std * n01(rng), std * n01(rng)); };

    const int k_max = cfg.ticks();
    const double dt = cfg.dt();
    const int every = cfg.posmeas_every();
    const auto& traj = cfg.trajectory;

    NonlinearTrial t;
    t.seed = seed;
    t.dt = dt;
    t.truth.resize(static_cast<std::size_t>(k_max) + 1);
    t.imu.resize(static_cast<std::size_t>(k_max) + 1);
    t.uwb.resize(static_cast<std::size_t>(k_max) + 1);

    Rotation3 att;
    for (int k = 0; k <= k_max; ++k) {
        const double tk = k * dt;
        t.truth[k] = {att, traj.position(tk), traj.velocity(tk)};
        att = att * exp_map(traj.angular_velocity(tk + 0.5 * dt) * dt);
    }

    const Vector3d e_att = draw(cfg.init_att_std);
    const Vector3d e_pos = draw(cfg.init_pos_std);
    const Vector3d e_vel = draw(cfg.init_vel_std);
    t.init_att = exp_map(-e_att) * t.truth[0].att;  // truth = Exp(e_att)·estimate
    t.init_pos = t.truth[0].pos - e_pos;
    t.init_vel = t.truth[0].vel - e_vel;

    for (int k = 0; k <= k_max; ++k) {
        const double tk = k * dt;
        const Rotation3& c = t.truth[k].att;
        const Rotation3 c_inv = c.inverse();
        const Vector3d mean_accel = (traj.velocity(tk + dt) - traj.velocity(tk)) / dt;
        ImuSample& s = t.imu[k];
        s.gyro = traj.angular_velocity(tk + 0.5 * dt) + draw(cfg.gyro_std);
        s.accel = c_inv * Vector3d(mean_accel - cfg.gravity) + draw(cfg.accel_std);
        s.mag = c_inv * cfg.mag_reference + draw(cfg.mag_std);
        if (k > 0 && k % every == 0) {
            t.uwb[k] = t.truth[k].pos + c * cfg.lever_arm + draw(cfg.posmeas_std);
        }
    }
    return t;
}

/// Sigma-point receiving model for one tick. `att_prev`/`accel_prev` drive the
/// interval [t_{k-1}, t_k]; `att_now` is the AHRS attitude at t_k.
inline CascadeModel imu_uwb_sigma_model(const Rotation3& att_prev, const Vector3d& accel_prev,
                                        const Rotation3& att_now, double dt, const NonlinearConfig& cfg) {
    CascadeModel m;
    const Vector3d g = cfg.gravity;
    m.process = [att_prev, accel_prev, g, dt](const VectorXd& x1, const VectorXd& x2, const VectorXd& w) -> VectorXd {
        const Vector3d a = exp_map(x2.head<3>()) * (att_prev * Vector3d(accel_prev - w.head<3>())) + g;
        VectorXd out(6);
        out << x1.head<3>() + x1.tail<3>() * dt + 0.5 * a * dt * dt, x1.tail<3>() + a * dt;
        return out;
    };
    m.process_noise = cfg.accel_std * cfg.accel_std * MatrixXd::Identity(3, 3);
    const Vector3d lever_world = att_now * cfg.lever_arm;
    m.measurement = [lever_world](const VectorXd& x1, const VectorXd& x2, const VectorXd& nu) -> VectorXd {
        return x1.head<3>() + exp_map(x2.head<3>()) * lever_world + nu.head<3>();
    };
    m.measurement_noise = cfg.posmeas_std * cfg.posmeas_std * MatrixXd::Identity(3, 3);
    m.psi_hat = MatrixXd::Identity(3, 3);
    return m;
}

/// First-order model about δθ = 0; exact in [r; v].
inline LinearCascadeModel imu_uwb_linear_model(const Rotation3& att_prev, const Vector3d& accel_prev,
                                               const Rotation3& att_now, double dt, const NonlinearConfig& cfg) {
    const Eigen::Matrix3d i3 = Eigen::Matrix3d::Identity();
    const Vector3d f_world = att_prev * accel_prev;
    const double h = 0.5 * dt * dt;
    LinearCascadeModel m;
    m.A1 = MatrixXd::Identity(6, 6);
    m.A1.topRightCorner(3, 3) = dt * i3;
    m.B1 = MatrixXd(6, 3);
    m.B1 << -h * skew(f_world), -dt * skew(f_world);
    m.L1 = MatrixXd(6, 3);
    m.L1 << -h * att_prev.matrix(), -dt * att_prev.matrix();
    m.process_offset = VectorXd(6);
    m.process_offset << h * (f_world + cfg.gravity), dt * (f_world + cfg.gravity);
    m.Q1 = cfg.accel_std * cfg.accel_std * i3;

    const Vector3d lever_world = att_now * cfg.lever_arm;
    m.C1 = MatrixXd::Zero(3, 6);
    m.C1.leftCols(3) = i3;
    m.D1 = -skew(lever_world);
    m.M1 = i3;
    m.R1 = cfg.posmeas_std * cfg.posmeas_std * i3;
    m.measurement_offset = lever_world;
    m.psi_hat = i3;
    return m;
}

}  // namespace cascade
