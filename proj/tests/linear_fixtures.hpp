#pragma once

// Random linear cascade systems and an independent stacked-state oracle.

#include <Eigen/SVD>

#include <algorithm>
#include <optional>
#include <random>

#include "cascade/filters/linearized.hpp"
#include "test_support.hpp"

namespace cascade::testing {

struct LinearDims {
    Index n1 = 2, n2 = 2, m1 = 1, m2 = 1, l1 = 2, l2 = 2;
};

/// Random matrix scaled to spectral norm `rho`.
inline MatrixXd random_contraction(std::mt19937_64& rng, Index n, double rho) {
    const MatrixXd a = random_matrix(rng, n, n);
    Eigen::JacobiSVD<MatrixXd> svd(a);
    return a * (rho / svd.singularValues()(0));
}

inline LinearCascadeModel random_linear_model(std::mt19937_64& rng, const LinearDims& d, bool with_d1) {
    LinearCascadeModel m;
    m.A1 = random_contraction(rng, d.n1, 0.95);
    m.B1 = 0.5 * random_matrix(rng, d.n1, d.n2);
    m.L1 = random_matrix(rng, d.n1, d.l1);
    m.C1 = random_matrix(rng, d.m1, d.n1);
    m.D1 = with_d1 ? MatrixXd(0.5 * random_matrix(rng, d.m1, d.n2)) : MatrixXd::Zero(d.m1, d.n2);
    m.M1 = MatrixXd::Identity(d.m1, d.m1);
    m.A2 = random_contraction(rng, d.n2, 0.98);
    m.L2 = random_matrix(rng, d.n2, d.l2);
    m.C2 = random_matrix(rng, d.m2, d.n2);
    m.M2 = MatrixXd::Identity(d.m2, d.m2);
    m.Q1 = random_spd(rng, d.l1, 0.05) * 0.1;
    m.Q2 = random_spd(rng, d.l2, 0.05) * 0.1;
    m.R1 = random_spd(rng, d.m1, 0.1);
    m.R2 = random_spd(rng, d.m2, 0.1);
    return m;
}

/// Full stacked-state covariance under the cascade's gain structure: the
/// feeding measurement only updates x2 (gain [0; G2]) and the receiving
/// measurement only updates x1 (gain [K1; 0]). Joseph-form updates keep the
/// joint covariance exact for these constrained gains.
class StackedOracle {
public:
    StackedOracle(const LinearCascadeModel& m, const MatrixXd& p0) : m_(m), p_(p0) {}

    const MatrixXd& cov() const { return p_; }

    void predict() {
        const Index n1 = m_.n1();
        const Index n2 = m_.n2();
        MatrixXd a = MatrixXd::Zero(n1 + n2, n1 + n2);
        a.topLeftCorner(n1, n1) = m_.A1;
        a.topRightCorner(n1, n2) = m_.B1;
        a.bottomRightCorner(n2, n2) = m_.A2;
        MatrixXd q = MatrixXd::Zero(n1 + n2, n1 + n2);
        q.topLeftCorner(n1, n1) = m_.L1 * m_.Q1 * m_.L1.transpose();
        q.bottomRightCorner(n2, n2) = m_.L2 * m_.Q2 * m_.L2.transpose();
        p_ = a * p_ * a.transpose() + q;
    }

    void correct_feeding() {
        const Index n1 = m_.n1();
        const Index n2 = m_.n2();
        MatrixXd h = MatrixXd::Zero(m_.C2.rows(), n1 + n2);
        h.rightCols(n2) = m_.C2;
        const MatrixXd r = m_.M2 * m_.R2 * m_.M2.transpose();
        const MatrixXd p22 = p_.bottomRightCorner(n2, n2);
        const MatrixXd g2 = p22 * m_.C2.transpose() * (m_.C2 * p22 * m_.C2.transpose() + r).inverse();
        MatrixXd k = MatrixXd::Zero(n1 + n2, m_.C2.rows());
        k.bottomRows(n2) = g2;
        joseph(k, h, r);
    }

    void correct_receiving() {
        const Index n1 = m_.n1();
        MatrixXd h(m_.C1.rows(), n1 + m_.n2());
        h << m_.C1, m_.D1;
        const MatrixXd r = m_.M1 * m_.R1 * m_.M1.transpose();
        const MatrixXd s = h * p_ * h.transpose() + r;
        const MatrixXd k1 = (p_ * h.transpose()).topRows(n1) * s.inverse();
        MatrixXd k = MatrixXd::Zero(p_.rows(), m_.C1.rows());
        k.topRows(n1) = k1;
        joseph(k, h, r);
    }

private:
    void joseph(const MatrixXd& k, const MatrixXd& h, const MatrixXd& r) {
        const MatrixXd i_kh = MatrixXd::Identity(p_.rows(), p_.rows()) - k * h;
        p_ = i_kh * p_ * i_kh.transpose() + k * r * k.transpose();
        p_ = 0.5 * (p_ + p_.transpose());
    }

    LinearCascadeModel m_;
    MatrixXd p_;
};


inline LinearDims random_dims(std::mt19937_64& rng) {
    std::uniform_int_distribution<Index> n(1, 4), m(1, 3);
    return {n(rng), n(rng), m(rng), m(rng), m(rng), m(rng)};
}

inline double rel_diff(const MatrixXd& a, const MatrixXd& b) {
    return max_abs(a - b) / (1.0 + std::max(max_abs(a), max_abs(b)));
}

/// Runs the closed-form and the sigma-point receiving filters side by side on
/// one random linear system (random D1, offsets and psi_hat) and returns the
/// worst relative per-step disagreement over mean, covariance and cross block.
inline double linearized_vs_sigma_gap(std::uint64_t seed, int steps) {
    std::mt19937_64 rng(seed);
    const LinearDims d = random_dims(rng);
    LinearCascadeModel m = random_linear_model(rng, d, true);
    m.process_offset = random_vector(rng, d.n1);
    m.measurement_offset = random_vector(rng, d.m1);
    m.psi_hat = 0.9 * random_contraction(rng, d.n2, 0.9);
    const CascadeModel sm = to_sigma_model(m);

    const MatrixXd p0 = random_spd(rng, d.n1 + d.n2, 0.2);
    CascadeBelief lin{Gaussian(random_vector(rng, d.n1), p0.topLeftCorner(d.n1, d.n1)),
                      p0.topRightCorner(d.n1, d.n2), 0};
    CascadeBelief sig = lin;
    FeedingOutput prev{Gaussian(random_vector(rng, d.n2), p0.bottomRightCorner(d.n2, d.n2)), std::nullopt};
    double worst = 0.0;
    for (int k = 0; k < steps; ++k) {
        FeedingOutput now = feeding_kf_step(prev.x2, m, random_vector(rng, d.m2));
        if (k % 2 == 1) now.psi.reset();  // alternate exact Psi and psi_hat
        std::optional<VectorXd> y;
        if (k % 5 != 4) y = random_vector(rng, d.m1);
        lin = linearized_cascade_step(lin, prev, now, y, m);
        sig = cascade_step(sig, prev, now, y, sm);
        worst = std::max({worst, rel_diff(lin.x1.mean(), sig.x1.mean()), rel_diff(lin.x1.cov(), sig.x1.cov()),
                          rel_diff(lin.cross12, sig.cross12)});
        prev = std::move(now);
    }
    return worst;
}

struct ExactPsiGap {
    double linearized = 0.0;
    double sigma = 0.0;
};

/// With D1 = 0 and the feeding filter's exact Psi, both receiving filters must
/// reproduce the stacked oracle's (P1, P12) blocks at every step.
inline ExactPsiGap exact_psi_gap(std::uint64_t seed, int steps) {
    std::mt19937_64 rng(seed);
    const LinearDims d = random_dims(rng);
    const LinearCascadeModel m = random_linear_model(rng, d, false);
    const CascadeModel sm = to_sigma_model(m);
    const MatrixXd p0 = random_spd(rng, d.n1 + d.n2, 0.2);

    StackedOracle oracle(m, p0);
    CascadeBelief lin{Gaussian(random_vector(rng, d.n1), p0.topLeftCorner(d.n1, d.n1)),
                      p0.topRightCorner(d.n1, d.n2), 0};
    CascadeBelief sig = lin;
    FeedingOutput prev{Gaussian(random_vector(rng, d.n2), p0.bottomRightCorner(d.n2, d.n2)), std::nullopt};
    ExactPsiGap gap;
    for (int k = 0; k < steps; ++k) {
        const FeedingOutput now = feeding_kf_step(prev.x2, m, random_vector(rng, d.m2));
        const VectorXd y = random_vector(rng, d.m1);
        lin = linearized_cascade_step(lin, prev, now, y, m);
        sig = cascade_step(sig, prev, now, y, sm);
        oracle.predict();
        oracle.correct_feeding();
        oracle.correct_receiving();
        const MatrixXd p1 = oracle.cov().topLeftCorner(d.n1, d.n1);
        const MatrixXd p12 = oracle.cov().topRightCorner(d.n1, d.n2);
        gap.linearized = std::max({gap.linearized, rel_diff(lin.x1.cov(), p1), rel_diff(lin.cross12, p12)});
        gap.sigma = std::max({gap.sigma, rel_diff(sig.x1.cov(), p1), rel_diff(sig.cross12, p12)});
        prev = now;
    }
    return gap;
}

}  // namespace cascade::testing
