#pragma once

// Closed-form receiving filter for linear (or per-step linearized) models:
//
//   x1_k = A1 x1_{k-1} + B1 x2_{k-1} + L1 w1 + process_offset
//   y1_k = C1 x1_k + D1 x2_k + M1 nu1 + measurement_offset
//
// The offsets carry the known-input terms of a Jacobian linearization.

#include <optional>

#include "cascade/filters/cascade.hpp"
#include "cascade/filters/kalman.hpp"

namespace cascade {

struct LinearCascadeModel {
    MatrixXd A1, B1, L1, C1, D1, M1;
    MatrixXd A2, L2, C2, M2;  // feeding side; only the oracle and full filters use these
    MatrixXd Q1, Q2, R1, R2;
    VectorXd process_offset;      // empty means zero
    VectorXd measurement_offset;  // empty means zero
    MatrixXd psi_hat;             // empty means A2ᵀ

    Index n1() const { return A1.rows(); }
    Index n2() const { return B1.cols(); }

    MatrixXd resolved_psi_hat() const {
        if (psi_hat.size() != 0) return psi_hat;
        if (A2.size() == 0) throw DimensionMismatch("LinearCascadeModel needs psi_hat or A2");
        return A2.transpose();
    }

    void validate() const {
        const Index a = n1();
        const Index b = n2();
        const bool ok = A1.cols() == a && B1.rows() == a && L1.rows() == a && L1.cols() == Q1.rows() &&
                        Q1.rows() == Q1.cols() && C1.cols() == a && D1.cols() == b && D1.rows() == C1.rows() &&
                        M1.rows() == C1.rows() && M1.cols() == R1.rows() && R1.rows() == R1.cols() &&
                        (process_offset.size() == 0 || process_offset.size() == a) &&
                        (measurement_offset.size() == 0 || measurement_offset.size() == C1.rows());
        if (!ok) throw DimensionMismatch("LinearCascadeModel matrices are inconsistent");
    }
};

/// Sigma-point model with the same dynamics, for cross-checking both receiving paths.
inline CascadeModel to_sigma_model(const LinearCascadeModel& m) {
    m.validate();
    CascadeModel out;
    out.process = [m](const VectorXd& x1, const VectorXd& x2, const VectorXd& w) -> VectorXd {
        VectorXd x = m.A1 * x1 + m.B1 * x2 + m.L1 * w;
        if (m.process_offset.size() != 0) x += m.process_offset;
        return x;
    };
    out.process_noise = m.Q1;
    out.measurement = [m](const VectorXd& x1, const VectorXd& x2, const VectorXd& nu) -> VectorXd {
        VectorXd y = m.C1 * x1 + m.D1 * x2 + m.M1 * nu;
        if (m.measurement_offset.size() != 0) y += m.measurement_offset;
        return y;
    };
    out.measurement_noise = m.R1;
    out.psi_hat = m.resolved_psi_hat();
    return out;
}

/// Linear feeding filter step. The output carries the exact Psi = ((I - G2 C2) A2)ᵀ
/// so that a receiving filter can map its cross block without approximation.
inline FeedingOutput feeding_kf_step(const Gaussian& x2, const LinearCascadeModel& m, const VectorXd& y2) {
    const Gaussian pred = kf_predict(x2, m.A2, m.L2 * m.Q2 * m.L2.transpose());
    auto corr = kf_correct(pred, m.C2, m.M2 * m.R2 * m.M2.transpose(), y2);
    const Index n2 = x2.dim();
    MatrixXd psi = ((MatrixXd::Identity(n2, n2) - corr.gain * m.C2) * m.A2).transpose();
    return {std::move(corr.posterior), std::move(psi)};
}

inline CascadeBelief linearized_predict(const CascadeBelief& belief, const FeedingOutput& feeding_prev,
                                        const LinearCascadeModel& m, const CascadeOptions& opts = {}) {
    m.validate();
    auto deflated = deflate_to_psd(JointGaussian2(belief.x1, feeding_prev.x2, belief.cross12), opts.deflation_beta);
    const auto& j = deflated.joint;
    VectorXd mean = m.A1 * j.mean1 + m.B1 * j.mean2;
    if (m.process_offset.size() != 0) mean += m.process_offset;
    const MatrixXd a_p12_bt = m.A1 * j.cov12 * m.B1.transpose();
    MatrixXd cov = m.A1 * j.cov11 * m.A1.transpose() + a_p12_bt + a_p12_bt.transpose() +
                   m.B1 * j.cov22 * m.B1.transpose() + m.L1 * m.Q1 * m.L1.transpose();
    MatrixXd cross = m.A1 * j.cov12 + m.B1 * j.cov22;
    return {Gaussian(std::move(mean), cov), std::move(cross), deflated.count};
}

inline CascadeBelief linearized_correct(const CascadeBelief& belief, const FeedingOutput& feeding_now,
                                        const VectorXd& y1, const LinearCascadeModel& m,
                                        const CascadeOptions& opts = {}) {
    m.validate();
    auto deflated = deflate_to_psd(JointGaussian2(belief.x1, feeding_now.x2, belief.cross12), opts.deflation_beta);
    const auto& j = deflated.joint;
    detail::MeasurementStats st;
    st.y_pred = m.C1 * j.mean1 + m.D1 * j.mean2;
    if (m.measurement_offset.size() != 0) st.y_pred += m.measurement_offset;
    st.s_x1y = j.cov11 * m.C1.transpose() + j.cov12 * m.D1.transpose();
    st.s_x2y = j.cov12.transpose() * m.C1.transpose() + j.cov22 * m.D1.transpose();
    const MatrixXd c_p12_dt = m.C1 * j.cov12 * m.D1.transpose();
    st.s_yy = symmetrize(m.C1 * j.cov11 * m.C1.transpose() + c_p12_dt + c_p12_dt.transpose() +
                         m.D1 * j.cov22 * m.D1.transpose() + m.M1 * m.R1 * m.M1.transpose());
    const Gaussian x1_pred = j.marginal1();
    auto out = detail::apply_correction({x1_pred, j.cov12, j.cov22, st}, y1, opts.form);
    out.deflations = deflated.count;
    return out;
}

inline CascadeBelief linearized_cascade_step(const CascadeBelief& belief, const FeedingOutput& feeding_prev,
                                             const FeedingOutput& feeding_now, const std::optional<VectorXd>& y1,
                                             const LinearCascadeModel& m, const CascadeOptions& opts = {}) {
    CascadeBelief pred = linearized_predict(belief, feeding_prev, m, opts);
    pred.cross12 = feeding_now.psi ? apply_psi(pred.cross12, *feeding_now.psi)
                                   : apply_psi(pred.cross12, m.resolved_psi_hat());
    if (!y1) return pred;
    const int predict_deflations = pred.deflations;
    CascadeBelief post = linearized_correct(pred, feeding_now, *y1, m, opts);
    post.deflations += predict_deflations;
    return post;
}

}  // namespace cascade
