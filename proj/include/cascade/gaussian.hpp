#pragma once

// Multivariate Gaussian algebra shared by every filter in the library:
// factorization with a one-shot jitter fallback, conditioning, cross-covariance
// deflation and the Kullback-Leibler divergence.
//
// No explicit matrix inverse is formed anywhere; every solve goes through a
// Cholesky factorization.

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>

#include "cascade/errors.hpp"

namespace cascade {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

inline MatrixXd symmetrize(const MatrixXd& m) { return 0.5 * (m + m.transpose()); }

/// Relative jitter added once to the diagonal of a PSD-but-singular matrix.
inline constexpr double kCholeskyJitter = 1e-12;

namespace detail {

inline std::optional<MatrixXd> try_cholesky(const MatrixXd& cov) {
    Eigen::LLT<MatrixXd> llt(cov);
    if (llt.info() != Eigen::Success) return std::nullopt;
    MatrixXd l = llt.matrixL();
    if (!l.allFinite()) return std::nullopt;
    return l;
}

inline std::optional<MatrixXd> try_cholesky_with_jitter(const MatrixXd& cov) {
    if (auto l = try_cholesky(cov)) return l;
    const auto n = cov.rows();
    const double trace = cov.trace();
    if (!(trace > 0.0) || !std::isfinite(trace)) return std::nullopt;
    MatrixXd jittered = cov;
    jittered.diagonal().array() += kCholeskyJitter * trace / static_cast<double>(n);
    return try_cholesky(jittered);
}

}  // namespace detail

/// Lower-triangular L with L·Lᵀ = cov. A singular PSD input gets one diagonal
/// jitter of 1e-12·trace/n before the factorization is declared a failure.
inline MatrixXd cholesky_psd(const MatrixXd& cov) {
    if (cov.rows() != cov.cols() || cov.rows() == 0) {
        throw DimensionMismatch("cholesky_psd expects a non-empty square matrix");
    }
    if (auto l = detail::try_cholesky_with_jitter(cov)) return *l;
    throw NotPositiveDefinite("cholesky_psd failed after jitter");
}

/// True when cov admits a Cholesky factor (with the same jitter policy).
inline bool passes_cholesky(const MatrixXd& cov) {
    return detail::try_cholesky_with_jitter(cov).has_value();
}

/// Solves A·X = B for symmetric positive-definite A.
inline MatrixXd solve_spd(const MatrixXd& a, const MatrixXd& b, const char* what = "solve_spd") {
    if (a.rows() != a.cols() || a.rows() != b.rows()) throw DimensionMismatch(what);
    Eigen::LLT<MatrixXd> llt(symmetrize(a));
    if (llt.info() == Eigen::Success) {
        MatrixXd x = llt.solve(b);
        if (x.allFinite()) return x;
    }
    throw SingularConditioning(what);
}

/// Computes B·A⁻¹ for symmetric positive-definite A (the gain-shaped solve).
inline MatrixXd right_solve_spd(const MatrixXd& b, const MatrixXd& a, const char* what = "right_solve_spd") {
    return solve_spd(a, b.transpose(), what).transpose();
}

/// Smallest eigenvalue tolerance used by the PSD invariant.
inline bool is_psd(const MatrixXd& cov, double rel_tol = 1e-10) {
    if (cov.rows() != cov.cols()) return false;
    if (cov.rows() == 0) return true;
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(symmetrize(cov), Eigen::EigenvaluesOnly);
    const double floor = -rel_tol * std::max(std::abs(cov.trace()), 1e-300);
    return es.eigenvalues().minCoeff() >= floor;
}

/// Mean vector and covariance. The covariance is symmetrized on construction.
class Gaussian {
public:
    Gaussian() = default;

    Gaussian(VectorXd mean, const MatrixXd& cov) : mean_(std::move(mean)), cov_(symmetrize(cov)) {
        if (cov_.rows() != cov_.cols() || cov_.rows() != mean_.size()) {
            throw DimensionMismatch("Gaussian mean has size " + std::to_string(mean_.size()) +
                                    " but covariance is " + std::to_string(cov_.rows()) + "x" +
                                    std::to_string(cov_.cols()));
        }
    }

    static Gaussian standard(Index n) { return {VectorXd::Zero(n), MatrixXd::Identity(n, n)}; }

    const VectorXd& mean() const { return mean_; }
    const MatrixXd& cov() const { return cov_; }
    Index dim() const { return mean_.size(); }

    bool is_psd(double rel_tol = 1e-10) const { return cascade::is_psd(cov_, rel_tol); }

private:
    VectorXd mean_;
    MatrixXd cov_;
};

/// Two marginal blocks plus their cross-covariance: [[cov11, cov12], [cov12ᵀ, cov22]].
struct JointGaussian2 {
    VectorXd mean1;
    VectorXd mean2;
    MatrixXd cov11;
    MatrixXd cov22;
    MatrixXd cov12;

    JointGaussian2() = default;

    JointGaussian2(VectorXd m1, VectorXd m2, const MatrixXd& c11, const MatrixXd& c22, MatrixXd c12)
        : mean1(std::move(m1)), mean2(std::move(m2)), cov11(symmetrize(c11)), cov22(symmetrize(c22)),
          cov12(std::move(c12)) {
        if (cov11.rows() != mean1.size() || cov11.cols() != mean1.size() || cov22.rows() != mean2.size() ||
            cov22.cols() != mean2.size() || cov12.rows() != mean1.size() || cov12.cols() != mean2.size()) {
            throw DimensionMismatch("JointGaussian2 block sizes are inconsistent");
        }
    }

    JointGaussian2(const Gaussian& first, const Gaussian& second, MatrixXd c12)
        : JointGaussian2(first.mean(), second.mean(), first.cov(), second.cov(), std::move(c12)) {}

    Index dim1() const { return mean1.size(); }
    Index dim2() const { return mean2.size(); }

    MatrixXd assembled_cov() const {
        const Index n1 = dim1();
        const Index n2 = dim2();
        MatrixXd p(n1 + n2, n1 + n2);
        p.topLeftCorner(n1, n1) = cov11;
        p.topRightCorner(n1, n2) = cov12;
        p.bottomLeftCorner(n2, n1) = cov12.transpose();
        p.bottomRightCorner(n2, n2) = cov22;
        return p;
    }

    Gaussian assembled() const {
        VectorXd m(dim1() + dim2());
        m << mean1, mean2;
        return {std::move(m), assembled_cov()};
    }

    Gaussian marginal1() const { return {mean1, cov11}; }
    Gaussian marginal2() const { return {mean2, cov22}; }
};

/// Distribution of block 1 given block 2 = observed2 (Schur complement).
inline Gaussian condition_gaussian(const JointGaussian2& joint, const VectorXd& observed2) {
    if (observed2.size() != joint.dim2()) throw DimensionMismatch("condition_gaussian observation size");
    Eigen::LLT<MatrixXd> llt(joint.cov22);
    if (llt.info() != Eigen::Success) throw SingularConditioning("condition_gaussian: cov22 not factorizable");
    const MatrixXd gain_t = llt.solve(joint.cov12.transpose());  // cov22⁻¹·cov12ᵀ
    const VectorXd innov = llt.solve(observed2 - joint.mean2);
    if (!gain_t.allFinite() || !innov.allFinite()) throw SingularConditioning("condition_gaussian");
    VectorXd mean = joint.mean1 + joint.cov12 * innov;
    MatrixXd cov = joint.cov11 - joint.cov12 * gain_t;
    return {std::move(mean), cov};
}

struct DeflationResult {
    JointGaussian2 joint;
    int count = 0;
};

/// Default multiplicative deflation factor for cross-covariance blocks.
inline constexpr double kDefaultDeflationBeta = 0.9;

/// Scales cov12 by beta^k for the smallest k ≥ 0 that makes the assembled
/// covariance factorizable.
inline DeflationResult deflate_to_psd(JointGaussian2 joint, double beta = kDefaultDeflationBeta) {
    if (!(beta > 0.0 && beta < 1.0)) throw ConfigError("deflation beta must lie in (0, 1)");
    constexpr int kMaxDeflations = 2000;
    int count = 0;
    while (!passes_cholesky(joint.assembled_cov())) {
        if (count == kMaxDeflations) {
            throw NotPositiveDefinite("deflate_to_psd: marginal blocks are not PSD");
        }
        joint.cov12 *= beta;
        ++count;
    }
    return {std::move(joint), count};
}

/// log det of an SPD matrix, or nullopt when it cannot be factored.
inline std::optional<double> log_det_spd(const MatrixXd& a) {
    Eigen::LLT<MatrixXd> llt(symmetrize(a));
    if (llt.info() != Eigen::Success) return std::nullopt;
    const MatrixXd l = llt.matrixL();
    return 2.0 * l.diagonal().array().log().sum();
}

/// KL(p ‖ q) between two Gaussians of equal dimension.
inline double kl_divergence(const Gaussian& p, const Gaussian& q) {
    if (p.dim() != q.dim()) throw DimensionMismatch("kl_divergence dimensions differ");
    Eigen::LLT<MatrixXd> llt_q(q.cov());
    if (llt_q.info() != Eigen::Success) throw SingularConditioning("kl_divergence: q covariance");
    const auto n = static_cast<double>(p.dim());
    const VectorXd diff = q.mean() - p.mean();
    const double trace_term = llt_q.solve(p.cov()).trace();
    const double maha = diff.dot(llt_q.solve(diff));
    const MatrixXd lq = llt_q.matrixL();
    const double log_det_q = 2.0 * lq.diagonal().array().log().sum();
    const auto log_det_p = log_det_spd(p.cov());
    if (!log_det_p) return std::numeric_limits<double>::infinity();
    const double kl = 0.5 * (trace_term + maha - n + log_det_q - *log_det_p);
    return kl > 0.0 ? kl : 0.0;
}

}  // namespace cascade
