#pragma once

// Spherical cubature sigma points: 2L equally weighted points at
// mean ± sqrt(L)·col_i(chol(cov)).

#include <Eigen/Core>

#include <cmath>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "cascade/errors.hpp"
#include "cascade/gaussian.hpp"

namespace cascade {

struct SigmaPointSet {
    std::vector<VectorXd> points;  // s_1..s_L (plus side) then s_{L+1}..s_{2L} (minus side)
    VectorXd source_mean;
    MatrixXd source_cov_factor;  // lower triangular

    Index dim() const { return source_mean.size(); }
    std::size_t size() const { return points.size(); }
};

/// Named slice [offset, offset + size) of the sigma-point (input) vector.
struct BlockSlice {
    std::string name;
    Index offset = 0;
    Index size = 0;
};

struct TransformResult {
    VectorXd mean;
    MatrixXd cov;
    /// For each named input block b: (1/2L) Σ (s_i[b] − mean[b]) (f(s_i) − mean)ᵀ.
    std::map<std::string, MatrixXd> cross_cov_blocks;

    const MatrixXd& cross(const std::string& name) const {
        auto it = cross_cov_blocks.find(name);
        if (it == cross_cov_blocks.end()) throw DimensionMismatch("no cross-covariance block named " + name);
        return it->second;
    }
};

inline SigmaPointSet cubature_points(const Gaussian& g) {
    const Index n = g.dim();
    if (n == 0) throw DimensionMismatch("cubature_points on an empty Gaussian");
    SigmaPointSet set;
    set.source_mean = g.mean();
    set.source_cov_factor = cholesky_psd(g.cov());
    const double scale = std::sqrt(static_cast<double>(n));
    set.points.resize(static_cast<std::size_t>(2 * n));
    for (Index i = 0; i < n; ++i) {
        const VectorXd offset = scale * set.source_cov_factor.col(i);
        set.points[static_cast<std::size_t>(i)] = g.mean() + offset;
        set.points[static_cast<std::size_t>(i + n)] = g.mean() - offset;
    }
    return set;
}

/// Pushes the sigma points through f and returns the equally weighted statistics.
/// Sums run in point-index order, so the result is bit-reproducible.
template <class F>
TransformResult transform(const SigmaPointSet& pts, F&& f, std::span<const BlockSlice> layout = {}) {
    const std::size_t count = pts.size();
    if (count == 0) throw DimensionMismatch("transform on an empty sigma-point set");
    for (const auto& b : layout) {
        if (b.offset < 0 || b.size < 0 || b.offset + b.size > pts.dim()) {
            throw DimensionMismatch("block '" + b.name + "' lies outside the sigma-point vector");
        }
    }

    std::vector<VectorXd> out;
    out.reserve(count);
    for (const auto& s : pts.points) {
        out.push_back(f(s));
        if (out.back().size() != out.front().size()) {
            throw DimensionMismatch("transform: output dimension varies across sigma points");
        }
    }

    const double w = 1.0 / static_cast<double>(count);
    const Index m = out.front().size();

    // Shifted accumulation: a constant f yields exactly zero deviations.
    TransformResult result;
    VectorXd shift_sum = VectorXd::Zero(m);
    for (const auto& z : out) shift_sum += z - out.front();
    result.mean = out.front() + w * shift_sum;

    const VectorXd& in_mean = pts.source_mean;
    result.cov = MatrixXd::Zero(m, m);
    for (const auto& b : layout) result.cross_cov_blocks[b.name] = MatrixXd::Zero(b.size, m);

    for (std::size_t i = 0; i < count; ++i) {
        const VectorXd dz = out[i] - result.mean;
        result.cov.noalias() += dz * dz.transpose();
        for (const auto& b : layout) {
            const VectorXd ds = pts.points[i].segment(b.offset, b.size) - in_mean.segment(b.offset, b.size);
            result.cross_cov_blocks[b.name].noalias() += ds * dz.transpose();
        }
    }
    result.cov = symmetrize(result.cov * w);
    for (auto& [name, c] : result.cross_cov_blocks) c *= w;
    return result;
}

template <class F>
TransformResult transform(const SigmaPointSet& pts, F&& f, std::initializer_list<BlockSlice> layout) {
    return transform(pts, std::forward<F>(f), std::span<const BlockSlice>(layout.begin(), layout.size()));
}

}  // namespace cascade
