// cascade-fuse: Monte Carlo runs of the cascaded estimators, log replay and
// result reports.
//
// Exit codes: 0 success, 1 unexpected error, 2 config error, 3 more than 1%
// of trials flagged.

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "cascade/cascade.hpp"

#ifndef CASCADE_GIT_DESCRIBE
#define CASCADE_GIT_DESCRIBE "unknown"
#endif

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitFlagged = 3;

struct SimulateArgs {
    std::string config;
    std::optional<int> trials;
    std::optional<std::uint64_t> seed;
    std::optional<int> workers;
    std::optional<double> duration;
    std::string out = "out";
};

void add_simulate_flags(CLI::App* cmd, SimulateArgs& a, bool with_duration) {
    cmd->add_option("--config", a.config, "JSON config file")->check(CLI::ExistingFile);
    cmd->add_option("--trials", a.trials, "Monte Carlo trial count");
    cmd->add_option("--seed", a.seed, "master seed");
    cmd->add_option("--workers", a.workers, "worker threads (0 = all cores)");
    cmd->add_option("--out", a.out, "output directory");
    if (with_duration) cmd->add_option("--duration", a.duration, "trial length in seconds");
}

int simulate(cascade::Scenario scenario, const SimulateArgs& a) {
    cascade::RunConfig cfg;
    cfg.scenario = scenario;
    if (scenario == cascade::Scenario::kNonlinear) cfg.n_trials = 100;
    else cfg.n_trials = 1000;
    if (!a.config.empty()) {
        cascade::apply_json(cfg, cascade::read_json_file(a.config));
        cfg.scenario = scenario;
    }
    if (a.trials) cfg.n_trials = *a.trials;
    if (a.seed) cfg.seed = *a.seed;
    if (a.workers) cfg.workers = *a.workers;
    if (a.duration) cfg.nonlinear.duration = *a.duration;

    const cascade::RunResult result = cascade::run_monte_carlo(cfg);
    cascade::write_results(result, a.out, CASCADE_GIT_DESCRIBE);
    std::cout << cascade::format_report(cascade::summary_json(result, CASCADE_GIT_DESCRIBE));
    for (const auto& f : result.flagged) {
        std::cerr << "flagged trial " << f.trial << " (seed " << f.seed << "): " << f.reason << '\n';
    }
    if (result.flagged_over_limit()) {
        std::cerr << "error: " << result.flagged.size() << " of " << cfg.n_trials
                  << " trials flagged, above the 1% limit\n";
        return kExitFlagged;
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Cascaded Kalman filtering with sigma points: simulation, replay and reports"};
    app.set_version_flag("--version", std::string(CASCADE_GIT_DESCRIBE));
    app.require_subcommand(1);

    SimulateArgs lin_args, nl_args;
    auto* lin = app.add_subcommand("simulate-linear", "Monte Carlo run on the scalar two-process toy");
    add_simulate_flags(lin, lin_args, false);
    auto* nl = app.add_subcommand("simulate-nonlinear", "Monte Carlo run on the IMU + UWB rigid body");
    add_simulate_flags(nl, nl_args, true);

    std::string imu_csv, uwb_csv, ahrs_out, pos_out, replay_config;
    auto* replay = app.add_subcommand("replay", "Run the AHRS and the proposed cascade over recorded logs");
    replay->add_option("--imu", imu_csv, "IMU log: t,gx,gy,gz,ax,ay,az,mx,my,mz")->required()->check(CLI::ExistingFile);
    replay->add_option("--uwb", uwb_csv, "UWB log: t,px,py,pz")->required()->check(CLI::ExistingFile);
    replay->add_option("--ahrs-out", ahrs_out, "attitude output CSV")->required();
    replay->add_option("--pos-out", pos_out, "position/velocity output CSV");
    replay->add_option("--config", replay_config, "JSON config (nonlinear block sets noise levels)")
        ->check(CLI::ExistingFile);

    std::string report_dir;
    auto* report = app.add_subcommand("report", "Print the RMSE/NEES table of a finished run");
    report->add_option("--in", report_dir, "output directory of a simulate run")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitConfig;
    }

    try {
        if (*lin) return simulate(cascade::Scenario::kLinear, lin_args);
        if (*nl) return simulate(cascade::Scenario::kNonlinear, nl_args);
        if (*replay) {
            cascade::RunConfig cfg;
            if (!replay_config.empty()) cascade::apply_json(cfg, cascade::read_json_file(replay_config));
            const auto rows = cascade::run_replay(cascade::read_imu_csv(imu_csv), cascade::read_uwb_csv(uwb_csv),
                                                  cfg.nonlinear, cfg.options.cascade);
            cascade::write_replay_attitude(rows, ahrs_out);
            if (!pos_out.empty()) cascade::write_replay_position(rows, pos_out);
            return 0;
        }
        if (*report) {
            const auto path = std::filesystem::path(report_dir) / "summary.json";
            std::cout << cascade::format_report(cascade::read_json_file(path));
            return 0;
        }
    } catch (const cascade::ConfigError& e) {
        std::cerr << e.what() << '\n';
        return kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
