#pragma once

// Scalar two-process benchmark:
//
//   x1_k = x1_{k-1} - x2_{k-1} + w1,   y1_k = x1_k + x2_k + nu1
//   x2_k = x2_{k-1} + w2,              y2_k = x2_k + nu2

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "cascade/filters/cascade.hpp"
#include "cascade/filters/linearized.hpp"

namespace cascade {

struct LinearToyConfig {
    double q1 = 1.0;
    double q2 = 0.01;
    double r1 = 1.0;
    double r2 = 100.0;
    int steps = 1000;
    double init_mean1 = 0.0;
    double init_mean2 = 0.0;
    double init_var1 = 1.0;
    double init_var2 = 1.0;

    /// Filters need strictly positive noise; the simulator alone accepts zeros.
    void validate(bool allow_zero_noise = false) const {
        const auto ok = [&](double v) { return allow_zero_noise ? v >= 0.0 : v > 0.0; };
        if (!(ok(q1) && ok(q2) && ok(r1) && ok(r2) && ok(init_var1) && ok(init_var2))) {
            throw ConfigError(allow_zero_noise ? "linear toy variances must be non-negative"
                                               : "linear toy variances must be positive");
        }
        if (steps < 1) throw ConfigError("linear toy steps must be at least 1");
    }
};

/// Index 0 holds the initial state; measurements exist for k >= 1.
struct LinearToyTrial {
    std::uint64_t seed = 0;
    std::vector<double> x1, x2, y1, y2;
};

inline LinearToyTrial simulate_linear_trial(const LinearToyConfig& cfg, std::uint64_t seed) {
    cfg.validate(true);
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> n01(0.0, 1.0);
    const auto n = static_cast<std::size_t>(cfg.steps) + 1;
    LinearToyTrial t;
    t.seed = seed;
    t.x1.resize(n);
    t.x2.resize(n);
    t.y1.assign(n, std::nan(""));
    t.y2.assign(n, std::nan(""));
    t.x1[0] = cfg.init_mean1 + std::sqrt(cfg.init_var1) * n01(rng);
    t.x2[0] = cfg.init_mean2 + std::sqrt(cfg.init_var2) * n01(rng);
    const double sq1 = std::sqrt(cfg.q1), sq2 = std::sqrt(cfg.q2);
    const double sr1 = std::sqrt(cfg.r1), sr2 = std::sqrt(cfg.r2);
    for (std::size_t k = 1; k < n; ++k) {
        const double w1 = sq1 * n01(rng);
        const double w2 = sq2 * n01(rng);
        const double v1 = sr1 * n01(rng);
        const double v2 = sr2 * n01(rng);
        t.x1[k] = t.x1[k - 1] - t.x2[k - 1] + w1;
        t.x2[k] = t.x2[k - 1] + w2;
        t.y1[k] = t.x1[k] + t.x2[k] + v1;
        t.y2[k] = t.x2[k] + v2;
    }
    return t;
}

inline LinearCascadeModel linear_toy_model(const LinearToyConfig& cfg) {
    const auto s = [](double v) { return MatrixXd::Constant(1, 1, v); };
    LinearCascadeModel m;
    m.A1 = s(1);
    m.B1 = s(-1);
    m.L1 = s(1);
    m.C1 = s(1);
    m.D1 = s(1);
    m.M1 = s(1);
    m.A2 = s(1);
    m.L2 = s(1);
    m.C2 = s(1);
    m.M2 = s(1);
    m.Q1 = s(cfg.q1);
    m.Q2 = s(cfg.q2);
    m.R1 = s(cfg.r1);
    m.R2 = s(cfg.r2);
    m.psi_hat = s(1);
    return m;
}

/// Scalar receiving-filter recursion with Psi = 1, written out by hand.
/// `feeding_prev` and `feeding_now` are the feeding posteriors at k-1 and k.
inline CascadeBelief toy_closed_form_step(const CascadeBelief& belief, const Gaussian& feeding_prev,
                                          const Gaussian& feeding_now, double y1, const LinearToyConfig& cfg) {
    const double x1 = belief.x1.mean()(0);
    const double p1 = belief.x1.cov()(0, 0);
    const double p12 = belief.cross12(0, 0);
    const double x2_prev = feeding_prev.mean()(0);
    const double p2_prev = feeding_prev.cov()(0, 0);
    const double x2 = feeding_now.mean()(0);
    const double p2 = feeding_now.cov()(0, 0);

    const double x1_pred = x1 - x2_prev;
    const double p1_pred = p1 - 2.0 * p12 + p2_prev + cfg.q1;
    const double p12_pred = p12 - p2_prev;  // Psi = 1

    const double gain = (p1_pred + p12_pred) / (p1_pred + 2.0 * p12_pred + p2 + cfg.r1);
    const double x1_post = x1_pred + gain * (y1 - (x1_pred + x2));
    const double p1_post = (1.0 - gain) * (1.0 - gain) * p1_pred - 2.0 * (1.0 - gain) * gain * p12_pred +
                           gain * gain * (p2 + cfg.r1);
    const double p12_post = p12_pred - gain * (p12_pred + p2);

    return {Gaussian(VectorXd::Constant(1, x1_post), MatrixXd::Constant(1, 1, p1_post)),
            MatrixXd::Constant(1, 1, p12_post), 0};
}

}  // namespace cascade
