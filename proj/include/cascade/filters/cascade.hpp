#pragma once

// Sigma-point receiving filters for a two-filter cascade.
//
// The receiving filter estimates x1 and consumes the feeding filter's
// posterior N(x2_hat, P2) at every step. Three variants share the machinery:
//
//   proposed  tracks the cross-covariance P12 between its error and the
//             feeding estimate error, propagating it with sigma points and
//             mapping it across the feeding correction with Psi
//   naive     forces every cross block to zero
//   spci      inflates the marginal blocks (1/w, 1/(1-w)) and drops the cross
//             blocks, Covariance-Intersection style
//
// Every joint covariance is deflated to PSD before it is factored.

#include <functional>
#include <optional>

#include "cascade/gaussian.hpp"
#include "cascade/sigma_points.hpp"

namespace cascade {

/// Feeding filter output at one time step.
struct FeedingOutput {
    Gaussian x2;
    /// Psi_k = ((I - G_k C2) A2)ᵀ, when the feeding filter cooperates.
    std::optional<MatrixXd> psi;
};

/// Receiving-filter belief: x1 plus its cross-covariance with the feeding estimate.
struct CascadeBelief {
    Gaussian x1;
    MatrixXd cross12;  // n1 x n2
    int deflations = 0;  // deflation passes spent in the most recent predict/correct

    static CascadeBelief uncorrelated(Gaussian x1, Index n2) {
        const Index n1 = x1.dim();
        return {std::move(x1), MatrixXd::Zero(n1, n2), 0};
    }
};

using ProcessFn = std::function<VectorXd(const VectorXd& x1, const VectorXd& x2, const VectorXd& w)>;
using MeasurementFn = std::function<VectorXd(const VectorXd& x1, const VectorXd& x2, const VectorXd& nu)>;

struct CascadeModel {
    ProcessFn process;           // x1_k = f1(x1_{k-1}, x2_{k-1}, w1)
    MatrixXd process_noise;      // Q1
    MeasurementFn measurement;   // y1_k = g1(x1_k, x2_k, nu1)
    MatrixXd measurement_noise;  // R1
    MatrixXd psi_hat;            // approximate Psi, typically A2ᵀ
};

enum class CorrectionForm {
    /// x1 = x1c + K1·(y - yc), P1 = P1c - K1·Σ_xyᵀ; the marginal posterior of x1.
    kMarginal,
    /// Additionally conditions on x2 = x2_hat through K12 (the literal coupled-gain form).
    kConditional,
};

struct CascadeOptions {
    double deflation_beta = kDefaultDeflationBeta;
    CorrectionForm form = CorrectionForm::kMarginal;
};

namespace detail {

/// Stacks [x1; x2; noise] with a block-diagonal noise term.
inline Gaussian augment(const JointGaussian2& joint, const MatrixXd& noise_cov) {
    const Index n1 = joint.dim1();
    const Index n2 = joint.dim2();
    const Index nw = noise_cov.rows();
    VectorXd mean = VectorXd::Zero(n1 + n2 + nw);
    mean << joint.mean1, joint.mean2, VectorXd::Zero(nw);
    MatrixXd cov = MatrixXd::Zero(n1 + n2 + nw, n1 + n2 + nw);
    cov.topLeftCorner(n1 + n2, n1 + n2) = joint.assembled_cov();
    cov.bottomRightCorner(nw, nw) = noise_cov;
    return {std::move(mean), cov};
}

struct PredictStats {
    Gaussian x1;
    MatrixXd cross12;  // P12_{k,k-1}
};

inline PredictStats sigma_predict(const JointGaussian2& joint, const MatrixXd& q, const ProcessFn& f) {
    const Index n1 = joint.dim1();
    const Index n2 = joint.dim2();
    const Index nw = q.rows();
    const SigmaPointSet pts = cubature_points(augment(joint, q));
    const BlockSlice layout[] = {{"x2", n1, n2}};
    TransformResult res = transform(
        pts,
        [&](const VectorXd& v) { return f(v.head(n1), v.segment(n1, n2), v.tail(nw)); },
        std::span<const BlockSlice>(layout));
    if (res.mean.size() != n1) throw DimensionMismatch("process model output size differs from x1");
    return {Gaussian(std::move(res.mean), res.cov), res.cross("x2").transpose()};
}

struct MeasurementStats {
    VectorXd y_pred;
    MatrixXd s_x1y;  // n1 x m
    MatrixXd s_x2y;  // n2 x m
    MatrixXd s_yy;   // m x m
};

inline MeasurementStats sigma_measurement(const JointGaussian2& joint, const MatrixXd& r, const MeasurementFn& g) {
    const Index n1 = joint.dim1();
    const Index n2 = joint.dim2();
    const Index nv = r.rows();
    const SigmaPointSet pts = cubature_points(augment(joint, r));
    const BlockSlice layout[] = {{"x1", 0, n1}, {"x2", n1, n2}};
    TransformResult res = transform(
        pts,
        [&](const VectorXd& v) { return g(v.head(n1), v.segment(n1, n2), v.tail(nv)); },
        std::span<const BlockSlice>(layout));
    return {std::move(res.mean), res.cross("x1"), res.cross("x2"), std::move(res.cov)};
}

struct CorrectionInputs {
    const Gaussian& x1_pred;
    const MatrixXd& cross12;  // P12_{k,k}
    const MatrixXd& p2;       // P2_k
    const MeasurementStats& stats;
};

/// Gain equations shared by the sigma-point and linearized receiving filters.
inline CascadeBelief apply_correction(const CorrectionInputs& in, const VectorXd& y, CorrectionForm form) {
    const auto& st = in.stats;
    if (y.size() != st.y_pred.size()) throw DimensionMismatch("measurement size differs from model output");
    const MatrixXd k1 = right_solve_spd(st.s_x1y, st.s_yy, "receiving correction: S_yy");
    const VectorXd innov = y - st.y_pred;

    VectorXd mean = in.x1_pred.mean() + k1 * innov;
    MatrixXd cov = in.x1_pred.cov() - k1 * st.s_x1y.transpose();
    MatrixXd cross = in.cross12 - k1 * st.s_x2y.transpose();

    if (form == CorrectionForm::kConditional) {
        const MatrixXd k2 = right_solve_spd(st.s_x2y, st.s_yy, "receiving correction: S_yy");
        const MatrixXd p2_post = symmetrize(in.p2 - k2 * st.s_x2y.transpose());
        const MatrixXd k12 = right_solve_spd(cross, p2_post, "receiving correction: K12 denominator");
        mean -= k12 * (k2 * innov);
        cov -= k12 * (in.cross12.transpose() - k2 * st.s_x1y.transpose());
    }
    return {Gaussian(std::move(mean), cov), std::move(cross), 0};
}

}  // namespace detail

/// Cubature prediction over the augmented (x1, x2, w1) Gaussian.
/// The returned cross block is P12_{k,k-1}, the cross-covariance with the
/// previous feeding estimate.
inline CascadeBelief cascade_predict(const CascadeBelief& belief, const FeedingOutput& feeding_prev,
                                     const CascadeModel& model, const CascadeOptions& opts = {}) {
    auto deflated = deflate_to_psd(JointGaussian2(belief.x1, feeding_prev.x2, belief.cross12), opts.deflation_beta);
    auto stats = detail::sigma_predict(deflated.joint, model.process_noise, model.process);
    return {std::move(stats.x1), std::move(stats.cross12), deflated.count};
}

/// Maps P12_{k,k-1} to P12_{k,k}.
inline MatrixXd apply_psi(const MatrixXd& cross_pred, const MatrixXd& psi) {
    if (psi.rows() != psi.cols() || psi.rows() != cross_pred.cols()) {
        throw DimensionMismatch("apply_psi: psi must be n2 x n2");
    }
    return cross_pred * psi;
}

/// Exact Psi from a cooperating feeding filter takes precedence over psi_hat.
inline const MatrixXd& select_psi(const FeedingOutput& feeding_now, const MatrixXd& psi_hat) {
    return feeding_now.psi ? *feeding_now.psi : psi_hat;
}

/// Measurement update of the receiving filter. `belief.cross12` must already be P12_{k,k}.
inline CascadeBelief cascade_correct(const CascadeBelief& belief, const FeedingOutput& feeding_now,
                                     const VectorXd& y1, const CascadeModel& model, const CascadeOptions& opts = {}) {
    auto deflated = deflate_to_psd(JointGaussian2(belief.x1, feeding_now.x2, belief.cross12), opts.deflation_beta);
    const auto stats = detail::sigma_measurement(deflated.joint, model.measurement_noise, model.measurement);
    const Gaussian x1_pred = deflated.joint.marginal1();
    auto out = detail::apply_correction({x1_pred, deflated.joint.cov12, deflated.joint.cov22, stats}, y1, opts.form);
    out.deflations = deflated.count;
    return out;
}

/// Predict, map the cross block with Psi, and correct when a measurement is present.
inline CascadeBelief cascade_step(const CascadeBelief& belief, const FeedingOutput& feeding_prev,
                                  const FeedingOutput& feeding_now, const std::optional<VectorXd>& y1,
                                  const CascadeModel& model, const CascadeOptions& opts = {}) {
    CascadeBelief pred = cascade_predict(belief, feeding_prev, model, opts);
    pred.cross12 = apply_psi(pred.cross12, select_psi(feeding_now, model.psi_hat));
    if (!y1) return pred;
    const int predict_deflations = pred.deflations;
    CascadeBelief post = cascade_correct(pred, feeding_now, *y1, model, opts);
    post.deflations += predict_deflations;
    return post;
}

// ---------------------------------------------------------------------------
// Naive cascade: the feeding estimate is treated as independent of x1.

inline Gaussian naive_predict(const Gaussian& x1, const FeedingOutput& feeding_prev, const CascadeModel& model) {
    const JointGaussian2 joint(x1, feeding_prev.x2, MatrixXd::Zero(x1.dim(), feeding_prev.x2.dim()));
    return detail::sigma_predict(joint, model.process_noise, model.process).x1;
}

inline Gaussian naive_correct(const Gaussian& x1_pred, const FeedingOutput& feeding_now, const VectorXd& y1,
                              const CascadeModel& model) {
    const MatrixXd zero = MatrixXd::Zero(x1_pred.dim(), feeding_now.x2.dim());
    const JointGaussian2 joint(x1_pred, feeding_now.x2, zero);
    const auto stats = detail::sigma_measurement(joint, model.measurement_noise, model.measurement);
    return detail::apply_correction({x1_pred, zero, feeding_now.x2.cov(), stats}, y1, CorrectionForm::kMarginal).x1;
}

inline Gaussian naive_step(const Gaussian& x1, const FeedingOutput& feeding_prev, const FeedingOutput& feeding_now,
                           const std::optional<VectorXd>& y1, const CascadeModel& model) {
    Gaussian pred = naive_predict(x1, feeding_prev, model);
    return y1 ? naive_correct(pred, feeding_now, *y1, model) : pred;
}

// ---------------------------------------------------------------------------
// Sigma-point Covariance Intersection.

inline constexpr double kDefaultSpciWeight = 0.99;

/// Inflated joint [x1; x2; noise] with covariance blkdiag(P1/w, P2/(1-w), noise).
inline Gaussian spci_joint(const Gaussian& x1, const Gaussian& x2, const MatrixXd& noise_cov, double w) {
    if (!(w > 0.0 && w < 1.0)) throw ConfigError("SPCI weight must lie in (0, 1)");
    const JointGaussian2 joint(x1.mean(), x2.mean(), x1.cov() / w, x2.cov() / (1.0 - w),
                               MatrixXd::Zero(x1.dim(), x2.dim()));
    return detail::augment(joint, noise_cov);
}

inline Gaussian spci_predict(const Gaussian& x1, const FeedingOutput& feeding_prev, const CascadeModel& model,
                             double w = kDefaultSpciWeight) {
    if (!(w > 0.0 && w < 1.0)) throw ConfigError("SPCI weight must lie in (0, 1)");
    const JointGaussian2 joint(x1.mean(), feeding_prev.x2.mean(), x1.cov() / w, feeding_prev.x2.cov() / (1.0 - w),
                               MatrixXd::Zero(x1.dim(), feeding_prev.x2.dim()));
    return detail::sigma_predict(joint, model.process_noise, model.process).x1;
}

inline Gaussian spci_correct(const Gaussian& x1_pred, const FeedingOutput& feeding_now, const VectorXd& y1,
                             const CascadeModel& model, double w = kDefaultSpciWeight) {
    if (!(w > 0.0 && w < 1.0)) throw ConfigError("SPCI weight must lie in (0, 1)");
    const MatrixXd zero = MatrixXd::Zero(x1_pred.dim(), feeding_now.x2.dim());
    const JointGaussian2 joint(x1_pred.mean(), feeding_now.x2.mean(), x1_pred.cov() / w,
                               feeding_now.x2.cov() / (1.0 - w), zero);
    const auto stats = detail::sigma_measurement(joint, model.measurement_noise, model.measurement);
    const Gaussian inflated_prior = joint.marginal1();
    return detail::apply_correction({inflated_prior, zero, joint.cov22, stats}, y1, CorrectionForm::kMarginal).x1;
}

inline Gaussian spci_step(const Gaussian& x1, const FeedingOutput& feeding_prev, const FeedingOutput& feeding_now,
                          const std::optional<VectorXd>& y1, const CascadeModel& model,
                          double w = kDefaultSpciWeight) {
    Gaussian pred = spci_predict(x1, feeding_prev, model, w);
    return y1 ? spci_correct(pred, feeding_now, *y1, model, w) : pred;
}

}  // namespace cascade
