#pragma once

#include "cascade/gaussian.hpp"

namespace cascade {

inline Gaussian kf_predict(const Gaussian& prior, const MatrixXd& a, const MatrixXd& q) {
    if (a.cols() != prior.dim() || a.rows() != q.rows() || q.rows() != q.cols()) {
        throw DimensionMismatch("kf_predict");
    }
    return {a * prior.mean(), a * prior.cov() * a.transpose() + q};
}

struct KalmanCorrection {
    Gaussian posterior;
    MatrixXd gain;
};

inline KalmanCorrection kf_correct(const Gaussian& predicted, const MatrixXd& c, const MatrixXd& r,
                                   const VectorXd& y) {
    if (c.cols() != predicted.dim() || c.rows() != y.size() || r.rows() != y.size() || r.cols() != y.size()) {
        throw DimensionMismatch("kf_correct");
    }
    const MatrixXd& p = predicted.cov();
    const MatrixXd pct = p * c.transpose();
    const MatrixXd s = c * pct + r;
    const MatrixXd k = right_solve_spd(pct, s, "kf_correct: innovation covariance");
    VectorXd mean = predicted.mean() + k * (y - c * predicted.mean());
    const Index n = predicted.dim();
    MatrixXd cov = (MatrixXd::Identity(n, n) - k * c) * p;
    return {Gaussian(std::move(mean), cov), k};
}

/// One predict/correct cycle of the linear Kalman filter.
inline Gaussian kf_step(const Gaussian& prior, const MatrixXd& a, const MatrixXd& q, const MatrixXd& c,
                        const MatrixXd& r, const VectorXd& y) {
    return kf_correct(kf_predict(prior, a, q), c, r, y).posterior;
}

}  // namespace cascade
