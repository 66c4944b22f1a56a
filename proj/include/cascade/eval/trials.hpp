#pragma once

// Runs every selected estimator over one simulated trial on identical
// measurement streams and reduces the result to per-channel traces.
//
// A channel is one estimated quantity of one estimator: the receiving state
// of a cascaded filter, the [r; v] block of the full filter, or an attitude.

#include <algorithm>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "cascade/eval/metrics.hpp"
#include "cascade/filters/ahrs.hpp"
#include "cascade/filters/cascade.hpp"
#include "cascade/filters/full_spkf.hpp"
#include "cascade/filters/kalman.hpp"
#include "cascade/filters/linearized.hpp"
#include "cascade/scenarios/imu_uwb.hpp"
#include "cascade/scenarios/linear_toy.hpp"

namespace cascade {

enum class Estimator { kFull, kProposedSp, kProposedLin, kNaive, kSpci };

inline constexpr Estimator kAllEstimators[] = {Estimator::kFull, Estimator::kProposedSp, Estimator::kProposedLin,
                                               Estimator::kNaive, Estimator::kSpci};

inline std::string_view estimator_name(Estimator e) {
    switch (e) {
        case Estimator::kFull: return "full";
        case Estimator::kProposedSp: return "proposed-sp";
        case Estimator::kProposedLin: return "proposed-lin";
        case Estimator::kNaive: return "naive";
        case Estimator::kSpci: return "spci";
    }
    return "?";
}

inline Estimator parse_estimator(std::string_view name) {
    for (auto e : kAllEstimators) {
        if (estimator_name(e) == name) return e;
    }
    throw ConfigError("unknown estimator '" + std::string(name) +
                      "' (expected full, proposed-sp, proposed-lin, naive or spci)");
}

struct EstimatorOptions {
    CascadeOptions cascade;
    double spci_weight = kDefaultSpciWeight;
    bool cooperative_psi = false;  // pass the feeding filter's exact Psi to the proposed filters
};

struct ErrorRow {
    int step;
    int component;
    double error;
    double sigma;
};

struct ErrorGroup {
    std::string name;
    int offset;
    int size;
};

struct ChannelSpec {
    std::string name;
    int dof = 0;
    std::vector<ErrorGroup> groups;
    bool has_kl = false;          // compared against the full filter's receiving block
    bool has_deflations = false;  // proposed filters report deflation passes
};

struct ChannelTrace {
    std::vector<double> nees;
    std::vector<double> kl;
    std::vector<int> deflations;
    std::vector<double> group_sq;       // summed squared error norm per group
    std::vector<std::size_t> inside3;   // per component
    std::size_t samples = 0;
    std::vector<ErrorRow> rows;
};

struct TrialOutcome {
    std::uint64_t seed = 0;
    std::optional<std::string> failure;
    std::vector<ChannelTrace> channels;  // aligned with the channel specs
};

struct TraceOptions {
    bool record_errors = false;
    int errors_stride = 1;
};

namespace detail {

inline void record_step(ChannelTrace& tr, const ChannelSpec& spec, int step, const VectorXd& err,
                        const MatrixXd& cov, const TraceOptions& opt) {
    if (tr.group_sq.empty()) {
        tr.group_sq.assign(spec.groups.size(), 0.0);
        tr.inside3.assign(static_cast<std::size_t>(spec.dof), 0);
    }
    tr.nees.push_back(nees_sample(err, cov));
    for (std::size_t g = 0; g < spec.groups.size(); ++g) {
        tr.group_sq[g] += err.segment(spec.groups[g].offset, spec.groups[g].size).squaredNorm();
    }
    for (int j = 0; j < spec.dof; ++j) {
        if (within_three_sigma(err(j), cov(j, j))) ++tr.inside3[static_cast<std::size_t>(j)];
    }
    ++tr.samples;
    if (opt.record_errors && step % std::max(opt.errors_stride, 1) == 0) {
        for (int j = 0; j < spec.dof; ++j) tr.rows.push_back({step, j, err(j), std::sqrt(std::max(cov(j, j), 0.0))});
    }
}

inline bool contains(const std::vector<Estimator>& set, Estimator e) {
    return std::find(set.begin(), set.end(), e) != set.end();
}

inline bool any_cascaded(const std::vector<Estimator>& set) {
    return std::any_of(set.begin(), set.end(), [](Estimator e) { return e != Estimator::kFull; });
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Linear toy

/// Channel order follows `estimators`.
inline std::vector<ChannelSpec> linear_channels(const std::vector<Estimator>& estimators) {
    const bool have_full = detail::contains(estimators, Estimator::kFull);
    std::vector<ChannelSpec> out;
    for (auto e : estimators) {
        const bool proposed = e == Estimator::kProposedSp || e == Estimator::kProposedLin;
        out.push_back({std::string(estimator_name(e)), 1, {{"x1", 0, 1}}, have_full && e != Estimator::kFull,
                       proposed});
    }
    return out;
}

inline TrialOutcome run_linear_trial(const LinearToyConfig& cfg, const std::vector<Estimator>& estimators,
                                     const EstimatorOptions& opts, std::uint64_t seed, const TraceOptions& trace) {
    const auto specs = linear_channels(estimators);
    TrialOutcome out;
    out.seed = seed;
    out.channels.resize(specs.size());
    try {
        cfg.validate();
        const LinearToyTrial t = simulate_linear_trial(cfg, seed);
        const LinearCascadeModel lin = linear_toy_model(cfg);
        const CascadeModel sp = to_sigma_model(lin);

        const Gaussian x1_0(VectorXd::Constant(1, cfg.init_mean1), MatrixXd::Constant(1, 1, cfg.init_var1));
        FeedingOutput feeding_prev{Gaussian(VectorXd::Constant(1, cfg.init_mean2),
                                            MatrixXd::Constant(1, 1, cfg.init_var2)),
                                   std::nullopt};

        MatrixXd a(2, 2), q(2, 2), c(2, 2), r(2, 2);
        a << 1, -1, 0, 1;
        q << cfg.q1, 0, 0, cfg.q2;
        c << 1, 1, 0, 1;
        r << cfg.r1, 0, 0, cfg.r2;
        VectorXd m0(2);
        m0 << cfg.init_mean1, cfg.init_mean2;
        MatrixXd p0(2, 2);
        p0 << cfg.init_var1, 0, 0, cfg.init_var2;

        Gaussian full(m0, p0);
        CascadeBelief prop_sp = CascadeBelief::uncorrelated(x1_0, 1);
        CascadeBelief prop_lin = prop_sp;
        Gaussian naive = x1_0;
        Gaussian spci = x1_0;

        std::vector<Gaussian> posterior(specs.size());
        std::vector<int> deflations(specs.size(), 0);
        for (int k = 1; k <= cfg.steps; ++k) {
            const FeedingOutput exact = feeding_kf_step(feeding_prev.x2, lin, VectorXd::Constant(1, t.y2[k]));
            const FeedingOutput feeding_now{exact.x2, opts.cooperative_psi ? exact.psi : std::nullopt};
            const std::optional<VectorXd> y1 = VectorXd::Constant(1, t.y1[k]);
            for (std::size_t i = 0; i < estimators.size(); ++i) {
                switch (estimators[i]) {
                    case Estimator::kFull: {
                        VectorXd y(2);
                        y << t.y1[k], t.y2[k];
                        full = kf_step(full, a, q, c, r, y);
                        posterior[i] = Gaussian(full.mean().head(1), full.cov().topLeftCorner(1, 1));
                        break;
                    }
                    case Estimator::kProposedSp:
                        prop_sp = cascade_step(prop_sp, feeding_prev, feeding_now, y1, sp, opts.cascade);
                        posterior[i] = prop_sp.x1;
                        deflations[i] = prop_sp.deflations;
                        break;
                    case Estimator::kProposedLin:
                        prop_lin = linearized_cascade_step(prop_lin, feeding_prev, feeding_now, y1, lin, opts.cascade);
                        posterior[i] = prop_lin.x1;
                        deflations[i] = prop_lin.deflations;
                        break;
                    case Estimator::kNaive:
                        naive = naive_step(naive, feeding_prev, feeding_now, y1, sp);
                        posterior[i] = naive;
                        break;
                    case Estimator::kSpci:
                        spci = spci_step(spci, feeding_prev, feeding_now, y1, sp, opts.spci_weight);
                        posterior[i] = spci;
                        break;
                }
            }
            const std::size_t full_index = static_cast<std::size_t>(
                std::find(estimators.begin(), estimators.end(), Estimator::kFull) - estimators.begin());
            for (std::size_t i = 0; i < specs.size(); ++i) {
                const VectorXd err = VectorXd::Constant(1, t.x1[k]) - posterior[i].mean();
                detail::record_step(out.channels[i], specs[i], k, err, posterior[i].cov(), trace);
                if (specs[i].has_kl) out.channels[i].kl.push_back(kl_divergence(posterior[i], posterior[full_index]));
                if (specs[i].has_deflations) out.channels[i].deflations.push_back(deflations[i]);
            }
            feeding_prev = feeding_now;
        }
    } catch (const std::exception& ex) {
        out.failure = ex.what();
    }
    return out;
}

// ---------------------------------------------------------------------------
// IMU + UWB

inline constexpr std::string_view kAhrsChannel = "ahrs";
inline constexpr std::string_view kFullAttitudeChannel = "full-attitude";

/// Receiving channels follow `estimators`, then the AHRS attitude (when a
/// cascaded estimator runs) and the full filter's attitude (when it runs).
inline std::vector<ChannelSpec> nonlinear_channels(const std::vector<Estimator>& estimators) {
    const bool have_full = detail::contains(estimators, Estimator::kFull);
    std::vector<ChannelSpec> out;
    for (auto e : estimators) {
        const bool proposed = e == Estimator::kProposedSp || e == Estimator::kProposedLin;
        out.push_back({std::string(estimator_name(e)),
                       6,
                       {{"position", 0, 3}, {"velocity", 3, 3}},
                       have_full && e != Estimator::kFull,
                       proposed});
    }
    if (detail::any_cascaded(estimators)) out.push_back({std::string(kAhrsChannel), 3, {{"attitude", 0, 3}}});
    if (have_full) out.push_back({std::string(kFullAttitudeChannel), 3, {{"attitude", 0, 3}}});
    return out;
}

inline TrialOutcome run_nonlinear_trial(const NonlinearConfig& cfg, const std::vector<Estimator>& estimators,
                                        const EstimatorOptions& opts, std::uint64_t seed, const TraceOptions& trace) {
    const auto specs = nonlinear_channels(estimators);
    TrialOutcome out;
    out.seed = seed;
    out.channels.resize(specs.size());
    try {
        cfg.validate();
        const NonlinearTrial t = simulate_nonlinear_trial(cfg, seed);
        const AhrsParams ahrs_params = cfg.ahrs_params(opts.cooperative_psi);
        const FullSpkfParams full_params = cfg.full_params();
        const double dt = t.dt;

        const double pv = cfg.init_pos_std * cfg.init_pos_std;
        const double vv = cfg.init_vel_std * cfg.init_vel_std;
        const double av = cfg.init_att_std * cfg.init_att_std;
        VectorXd x1_mean(6);
        x1_mean << t.init_pos, t.init_vel;
        VectorXd x1_var(6);
        x1_var << pv, pv, pv, vv, vv, vv;
        const Gaussian x1_0(x1_mean, MatrixXd(x1_var.asDiagonal()));

        AttitudeEstimate att{t.init_att, av * Matrix3::Identity()};
        FeedingOutput feeding_prev{Gaussian(VectorXd::Zero(3), MatrixXd(att.cov)), std::nullopt};

        VectorXd full_var(9);
        full_var << av, av, av, pv, pv, pv, vv, vv, vv;
        FullState full{t.init_att, t.init_pos, t.init_vel, MatrixXd(full_var.asDiagonal())};
        CascadeBelief prop_sp = CascadeBelief::uncorrelated(x1_0, 3);
        CascadeBelief prop_lin = prop_sp;
        Gaussian naive = x1_0;
        Gaussian spci = x1_0;

        const bool run_ahrs = detail::any_cascaded(estimators);
        const auto full_it = std::find(estimators.begin(), estimators.end(), Estimator::kFull);
        const std::size_t full_index = static_cast<std::size_t>(full_it - estimators.begin());
        const bool have_full = full_it != estimators.end();

        std::vector<Gaussian> posterior(estimators.size());
        std::vector<int> deflations(estimators.size(), 0);
        const int k_max = cfg.ticks();
        for (int k = 1; k <= k_max; ++k) {
            const ImuSample& prev = t.imu[static_cast<std::size_t>(k - 1)];
            const ImuSample& now = t.imu[static_cast<std::size_t>(k)];
            const auto& uwb = t.uwb[static_cast<std::size_t>(k)];
            const std::optional<VectorXd> y1 = uwb ? std::optional<VectorXd>(VectorXd(*uwb)) : std::nullopt;

            const Rotation3 att_prev = att.mean;
            FeedingOutput feeding_now;
            if (run_ahrs) {
                AhrsStep step = ahrs_step(att, prev.gyro, now.accel, now.mag, dt, ahrs_params);
                att = step.att;
                feeding_now = std::move(step.feeding);
            }
            std::optional<CascadeModel> sp;
            for (std::size_t i = 0; i < estimators.size(); ++i) {
                const Estimator e = estimators[i];
                if (e != Estimator::kFull && e != Estimator::kProposedLin && !sp) {
                    sp = imu_uwb_sigma_model(att_prev, prev.accel, att.mean, dt, cfg);
                }
                switch (e) {
                    case Estimator::kFull:
                        full = full_spkf_step(full, prev.gyro, prev.accel, now.mag, uwb, dt, full_params);
                        posterior[i] = Gaussian((VectorXd(6) << full.pos, full.vel).finished(),
                                                full.cov.bottomRightCorner(6, 6));
                        break;
                    case Estimator::kProposedSp:
                        prop_sp = cascade_step(prop_sp, feeding_prev, feeding_now, y1, *sp, opts.cascade);
                        posterior[i] = prop_sp.x1;
                        deflations[i] = prop_sp.deflations;
                        break;
                    case Estimator::kProposedLin: {
                        const auto lin = imu_uwb_linear_model(att_prev, prev.accel, att.mean, dt, cfg);
                        prop_lin = linearized_cascade_step(prop_lin, feeding_prev, feeding_now, y1, lin, opts.cascade);
                        posterior[i] = prop_lin.x1;
                        deflations[i] = prop_lin.deflations;
                        break;
                    }
                    case Estimator::kNaive:
                        naive = naive_step(naive, feeding_prev, feeding_now, y1, *sp);
                        posterior[i] = naive;
                        break;
                    case Estimator::kSpci:
                        spci = spci_step(spci, feeding_prev, feeding_now, y1, *sp, opts.spci_weight);
                        posterior[i] = spci;
                        break;
                }
            }

            const TruthSample& truth = t.truth[static_cast<std::size_t>(k)];
            VectorXd truth_pv(6);
            truth_pv << truth.pos, truth.vel;
            for (std::size_t i = 0; i < estimators.size(); ++i) {
                detail::record_step(out.channels[i], specs[i], k, truth_pv - posterior[i].mean(), posterior[i].cov(),
                                    trace);
                if (specs[i].has_kl) out.channels[i].kl.push_back(kl_divergence(posterior[i], posterior[full_index]));
                if (specs[i].has_deflations) out.channels[i].deflations.push_back(deflations[i]);
            }
            std::size_t ch = estimators.size();
            if (run_ahrs) {
                const VectorXd e = attitude_error(att.mean, truth.att, AttitudeError::kWorld);
                detail::record_step(out.channels[ch], specs[ch], k, e, MatrixXd(att.cov), trace);
                ++ch;
            }
            if (have_full) {
                const VectorXd e = attitude_error(full.att, truth.att, AttitudeError::kWorld);
                detail::record_step(out.channels[ch], specs[ch], k, e, full.cov.topLeftCorner(3, 3), trace);
            }
            feeding_prev = std::move(feeding_now);
        }
    } catch (const std::exception& ex) {
        out.failure = ex.what();
    }
    return out;
}

}  // namespace cascade
