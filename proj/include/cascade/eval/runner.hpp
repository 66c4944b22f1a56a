#pragma once

// Monte Carlo driver. Trials run on a worker pool and are reduced in trial
// order, so results do not depend on the worker count.

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "cascade/eval/metrics.hpp"
#include "cascade/eval/trials.hpp"

namespace cascade {

enum class Scenario { kLinear, kNonlinear };

inline std::string_view scenario_name(Scenario s) { return s == Scenario::kLinear ? "linear" : "nonlinear"; }

struct RunConfig {
    Scenario scenario = Scenario::kLinear;
    std::vector<Estimator> estimators{std::begin(kAllEstimators), std::end(kAllEstimators)};
    int n_trials = 100;
    std::uint64_t seed = 1;
    LinearToyConfig linear;
    NonlinearConfig nonlinear;
    EstimatorOptions options;
    int workers = 1;        // 0 picks the hardware concurrency
    int errors_trials = 5;  // errors.csv keeps the first trials only
    int errors_stride = 1;

    void validate() const {
        if (n_trials < 1) throw ConfigError("n_trials must be at least 1");
        if (estimators.empty()) throw ConfigError("at least one estimator is required");
        for (std::size_t i = 0; i < estimators.size(); ++i) {
            for (std::size_t j = i + 1; j < estimators.size(); ++j) {
                if (estimators[i] == estimators[j]) throw ConfigError("estimators must be distinct");
            }
        }
        if (!(options.spci_weight > 0.0 && options.spci_weight < 1.0)) throw ConfigError("spci_weight must lie in (0, 1)");
        if (!(options.cascade.deflation_beta > 0.0 && options.cascade.deflation_beta < 1.0)) {
            throw ConfigError("deflation_beta must lie in (0, 1)");
        }
        if (workers < 0) throw ConfigError("workers must be non-negative");
        if (errors_trials < 0 || errors_stride < 1) throw ConfigError("errors_trials >= 0 and errors_stride >= 1");
        if (scenario == Scenario::kLinear) {
            linear.validate();
        } else {
            nonlinear.validate();
        }
    }
};

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::uint64_t trial_seed(std::uint64_t master, std::uint64_t index) { return splitmix64(master ^ index); }

struct TrialError {
    int trial;
    std::uint64_t seed;
    std::string reason;
};

struct ChannelRow {
    int trial;
    ErrorRow row;
};

struct ChannelResult {
    ChannelSpec spec;
    NeesSeries nees;
    std::vector<double> group_rmse;  // aligned with spec.groups
    std::vector<double> coverage;    // per component
    std::vector<double> kl_mean;     // per step, empty without a reference
    double kl_median = std::nan("");
    std::vector<double> deflation_mean;  // per step
    std::vector<ChannelRow> rows;
};

struct RunResult {
    RunConfig config;
    std::vector<ChannelResult> channels;
    int n_used = 0;
    std::vector<TrialError> flagged;

    /// More than 1% of trials raised a numerical error.
    bool flagged_over_limit() const { return flagged.size() * 100 > static_cast<std::size_t>(config.n_trials); }

    const ChannelResult* channel(std::string_view name) const {
        for (const auto& c : channels) {
            if (c.spec.name == name) return &c;
        }
        return nullptr;
    }
};

inline std::vector<ChannelSpec> channel_specs(const RunConfig& cfg) {
    return cfg.scenario == Scenario::kLinear ? linear_channels(cfg.estimators) : nonlinear_channels(cfg.estimators);
}

inline TrialOutcome run_trial(const RunConfig& cfg, int index) {
    const std::uint64_t seed = trial_seed(cfg.seed, static_cast<std::uint64_t>(index));
    const TraceOptions trace{index < cfg.errors_trials, cfg.errors_stride};
    return cfg.scenario == Scenario::kLinear
               ? run_linear_trial(cfg.linear, cfg.estimators, cfg.options, seed, trace)
               : run_nonlinear_trial(cfg.nonlinear, cfg.estimators, cfg.options, seed, trace);
}

namespace detail {

struct ChannelSums {
    std::vector<double> nees, kl, deflations, group_sq, inside3;
    double samples = 0.0;
    std::vector<ChannelRow> rows;
};

class Reducer {
public:
    explicit Reducer(std::vector<ChannelSpec> specs) : specs_(std::move(specs)), sums_(specs_.size()) {}

    void add(int index, TrialOutcome&& t) {
        if (t.failure) {
            flagged_.push_back({index, t.seed, *t.failure});
            return;
        }
        ++used_;
        for (std::size_t c = 0; c < specs_.size(); ++c) {
            ChannelTrace& tr = t.channels[c];
            ChannelSums& s = sums_[c];
            accumulate(s.nees, tr.nees);
            accumulate(s.kl, tr.kl);
            accumulate(s.deflations, std::vector<double>(tr.deflations.begin(), tr.deflations.end()));
            accumulate(s.group_sq, tr.group_sq);
            accumulate(s.inside3, std::vector<double>(tr.inside3.begin(), tr.inside3.end()));
            s.samples += static_cast<double>(tr.samples);
            for (const auto& r : tr.rows) s.rows.push_back({index, r});
        }
    }

    RunResult finish(const RunConfig& cfg) {
        RunResult out;
        out.config = cfg;
        out.n_used = used_;
        out.flagged = std::move(flagged_);
        for (std::size_t c = 0; c < specs_.size(); ++c) {
            ChannelSums& s = sums_[c];
            ChannelResult r;
            r.spec = specs_[c];
            r.nees.dof = r.spec.dof;
            r.nees.n_trials = used_;
            if (used_ > 0) {
                const double n = used_;
                for (double v : s.nees) r.nees.epsilon_bar.push_back(v / n);
                const auto b = nees_bounds(r.spec.dof, used_);
                r.nees.lower = b.lower;
                r.nees.upper = b.upper;
                for (double v : s.kl) r.kl_mean.push_back(v / n);
                for (double v : s.deflations) r.deflation_mean.push_back(v / n);
                for (double v : s.group_sq) r.group_rmse.push_back(std::sqrt(v / s.samples));
                for (double v : s.inside3) r.coverage.push_back(v / s.samples);
                if (!r.kl_mean.empty()) r.kl_median = median(r.kl_mean);
            }
            r.rows = std::move(s.rows);
            out.channels.push_back(std::move(r));
        }
        return out;
    }

private:
    static void accumulate(std::vector<double>& sum, const std::vector<double>& v) {
        if (sum.size() < v.size()) sum.resize(v.size(), 0.0);
        for (std::size_t k = 0; k < v.size(); ++k) sum[k] += v[k];
    }

    std::vector<ChannelSpec> specs_;
    std::vector<ChannelSums> sums_;
    std::vector<TrialError> flagged_;
    int used_ = 0;
};

}  // namespace detail

inline RunResult run_monte_carlo(const RunConfig& cfg) {
    cfg.validate();
    detail::Reducer reducer(channel_specs(cfg));
    const int n = cfg.n_trials;
    int workers = cfg.workers == 0 ? static_cast<int>(std::max(1u, std::thread::hardware_concurrency())) : cfg.workers;
    workers = std::min(workers, n);

    if (workers <= 1) {
        for (int i = 0; i < n; ++i) reducer.add(i, run_trial(cfg, i));
        return reducer.finish(cfg);
    }

    std::vector<std::optional<TrialOutcome>> pending(static_cast<std::size_t>(n));
    std::atomic<int> next_trial{0};
    int next_reduce = 0;
    std::mutex mu;
    const auto work = [&] {
        for (int i = next_trial++; i < n; i = next_trial++) {
            TrialOutcome t = run_trial(cfg, i);
            std::lock_guard lock(mu);
            pending[static_cast<std::size_t>(i)] = std::move(t);
            while (next_reduce < n && pending[static_cast<std::size_t>(next_reduce)]) {
                reducer.add(next_reduce, std::move(*pending[static_cast<std::size_t>(next_reduce)]));
                pending[static_cast<std::size_t>(next_reduce)].reset();
                ++next_reduce;
            }
        }
    };
    std::vector<std::jthread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(work);
    pool.clear();
    return reducer.finish(cfg);
}

}  // namespace cascade
