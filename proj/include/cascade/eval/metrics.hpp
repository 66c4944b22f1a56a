#pragma once

// Consistency and accuracy metrics: NEES with chi-square bounds, RMSE,
// ±3σ coverage and the KL divergence against a reference filter.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <span>
#include <vector>

#include "cascade/gaussian.hpp"
#include "cascade/so3.hpp"

namespace cascade {

/// Standard normal quantile: Acklam's rational approximation polished with
/// one Halley step on erfc (relative error near machine precision).
inline double normal_quantile(double p) {
    if (!(p > 0.0 && p < 1.0)) throw ConfigError("normal_quantile: p must lie in (0, 1)");
    static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
                                   1.383577518672690e+02,  -3.066479806614716e+01, 2.506628277459239e+00};
    static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
                                   6.680131188771972e+01,  -1.328068155288572e+01};
    static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
                                   -2.549732539343734e+00, 4.374664141464968e+00,  2.938163982698783e+00};
    static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
                                   3.754408661907416e+00};
    constexpr double p_low = 0.02425;
    double x;
    if (p < p_low) {
        const double q = std::sqrt(-2.0 * std::log(p));
        x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    } else if (p <= 1.0 - p_low) {
        const double q = p - 0.5;
        const double r = q * q;
        x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
            (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
    } else {
        const double q = std::sqrt(-2.0 * std::log1p(-p));
        x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    }
    const double e = 0.5 * std::erfc(-x / std::numbers::sqrt2) - p;
    const double u = e * std::sqrt(2.0 * std::numbers::pi) * std::exp(0.5 * x * x);
    return x - u / (1.0 + 0.5 * x * u);
}

/// Wilson–Hilferty chi-square quantile. Relative error stays below 0.1% for
/// dof ≥ 500 at the 2.5% and 97.5% levels.
inline double chi_square_quantile(double p, double dof) {
    if (!(dof > 0.0)) throw ConfigError("chi_square_quantile: dof must be positive");
    const double k = 2.0 / (9.0 * dof);
    const double t = 1.0 - k + normal_quantile(p) * std::sqrt(k);
    return dof * t * t * t;
}

struct ChiSquareBounds {
    double lower;
    double upper;
};

/// Two-sided bounds on the trial-averaged NEES of an n-dim state over N trials.
inline ChiSquareBounds nees_bounds(int dof, int n_trials, double confidence = 0.95) {
    const double total = static_cast<double>(dof) * n_trials;
    const double tail = 0.5 * (1.0 - confidence);
    return {chi_square_quantile(tail, total) / n_trials, chi_square_quantile(1.0 - tail, total) / n_trials};
}

/// eᵀ·P⁻¹·e, solved through a Cholesky factor.
inline double nees_sample(const VectorXd& error, const MatrixXd& cov) {
    const MatrixXd x = solve_spd(cov, error, "nees: step covariance");
    return error.dot(x.col(0));
}

struct NeesSeries {
    std::vector<double> epsilon_bar;
    int dof = 0;
    int n_trials = 0;
    double lower = 0.0;
    double upper = 0.0;

    /// Fraction of steps with lower ≤ ε̄ ≤ upper, counting steps at index ≥ from.
    double fraction_within(std::size_t from = 0) const {
        std::size_t in = 0, total = 0;
        for (std::size_t k = from; k < epsilon_bar.size(); ++k, ++total) {
            if (epsilon_bar[k] >= lower && epsilon_bar[k] <= upper) ++in;
        }
        return total == 0 ? 0.0 : static_cast<double>(in) / static_cast<double>(total);
    }

    double fraction_above(std::size_t from = 0) const {
        std::size_t above = 0, total = 0;
        for (std::size_t k = from; k < epsilon_bar.size(); ++k, ++total) {
            if (epsilon_bar[k] > upper) ++above;
        }
        return total == 0 ? 0.0 : static_cast<double>(above) / static_cast<double>(total);
    }
};

/// errors[i][k], covs[i][k]: trial i, step k.
inline NeesSeries nees(const std::vector<std::vector<VectorXd>>& errors,
                       const std::vector<std::vector<MatrixXd>>& covs, double confidence = 0.95) {
    if (errors.empty() || errors.size() != covs.size()) throw DimensionMismatch("nees: trial counts differ");
    const std::size_t steps = errors.front().size();
    NeesSeries s;
    s.n_trials = static_cast<int>(errors.size());
    s.dof = steps == 0 ? 0 : static_cast<int>(errors.front().front().size());
    s.epsilon_bar.assign(steps, 0.0);
    for (std::size_t i = 0; i < errors.size(); ++i) {
        if (errors[i].size() != steps || covs[i].size() != steps) throw DimensionMismatch("nees: step counts differ");
        for (std::size_t k = 0; k < steps; ++k) s.epsilon_bar[k] += nees_sample(errors[i][k], covs[i][k]);
    }
    for (double& e : s.epsilon_bar) e /= s.n_trials;
    if (s.dof > 0) {
        const auto b = nees_bounds(s.dof, s.n_trials, confidence);
        s.lower = b.lower;
        s.upper = b.upper;
    }
    return s;
}

/// sqrt of the mean squared error norm over every sample.
inline double rmse(std::span<const VectorXd> errors) {
    if (errors.empty()) throw DimensionMismatch("rmse of an empty set");
    double sum = 0.0;
    for (const auto& e : errors) sum += e.squaredNorm();
    return std::sqrt(sum / static_cast<double>(errors.size()));
}

inline double rmse(const std::vector<VectorXd>& errors) { return rmse(std::span<const VectorXd>(errors)); }

/// Geodesic angle between estimate and truth, ‖Log(C̄ᵀ·C)‖.
inline double attitude_error_angle(const Rotation3& estimate, const Rotation3& truth) {
    return log_map(estimate.inverse() * truth).norm();
}

inline bool within_three_sigma(double error, double variance) {
    return std::abs(error) <= 3.0 * std::sqrt(std::max(variance, 0.0));
}

/// Per-component fraction of samples with |e_j| ≤ 3·sqrt(P_jj).
inline std::vector<double> three_sigma_coverage(std::span<const VectorXd> errors, std::span<const MatrixXd> covs) {
    if (errors.size() != covs.size()) throw DimensionMismatch("three_sigma_coverage: sizes differ");
    if (errors.empty()) return {};
    const Index n = errors.front().size();
    std::vector<double> inside(static_cast<std::size_t>(n), 0.0);
    for (std::size_t i = 0; i < errors.size(); ++i) {
        for (Index j = 0; j < n; ++j) {
            if (within_three_sigma(errors[i](j), covs[i](j, j))) inside[static_cast<std::size_t>(j)] += 1.0;
        }
    }
    for (double& v : inside) v /= static_cast<double>(errors.size());
    return inside;
}

/// Per-step KL(estimate_k ‖ reference_k).
inline std::vector<double> kl_series(std::span<const Gaussian> estimate, std::span<const Gaussian> reference) {
    if (estimate.size() != reference.size()) throw DimensionMismatch("kl_series: lengths differ");
    std::vector<double> out;
    out.reserve(estimate.size());
    for (std::size_t k = 0; k < estimate.size(); ++k) out.push_back(kl_divergence(estimate[k], reference[k]));
    return out;
}

inline double median(std::vector<double> v) {
    if (v.empty()) return std::nan("");
    const auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
    std::nth_element(v.begin(), mid, v.end());
    if (v.size() % 2 == 1) return *mid;
    const double hi = *mid;
    const double lo = *std::max_element(v.begin(), mid);
    return 0.5 * (lo + hi);
}

}  // namespace cascade
