#pragma once

// Config parsing, result persistence and replay-log readers.
//
// Config files are JSON objects. Top-level keys set run options; the
// "linear" and "nonlinear" blocks address every scenario field, with the
// trajectory fields flattened into the nonlinear block. Unknown keys are
// rejected.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "cascade/eval/runner.hpp"

namespace cascade {

using Json = nlohmann::ordered_json;

namespace detail {

inline std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline double get_double(const Json& j, const std::string& key) {
    if (!j.is_number()) throw ConfigError("config key '" + key + "' must be a number");
    return j.get<double>();
}

inline int get_int(const Json& j, const std::string& key) {
    if (!j.is_number_integer()) throw ConfigError("config key '" + key + "' must be an integer");
    return j.get<int>();
}

inline bool get_bool(const Json& j, const std::string& key) {
    if (!j.is_boolean()) throw ConfigError("config key '" + key + "' must be true or false");
    return j.get<bool>();
}

inline Vector3d get_vec3(const Json& j, const std::string& key) {
    if (!j.is_array() || j.size() != 3) throw ConfigError("config key '" + key + "' must be an array of 3 numbers");
    Vector3d v;
    for (int i = 0; i < 3; ++i) v(i) = get_double(j[static_cast<std::size_t>(i)], key);
    return v;
}

inline Json vec3_json(const Vector3d& v) { return Json::array({v.x(), v.y(), v.z()}); }

inline void require_object(const Json& j, const std::string& what) {
    if (!j.is_object()) throw ConfigError(what + " must be a JSON object");
}

}  // namespace detail

inline Json to_json(const LinearToyConfig& c) {
    return Json{{"q1", c.q1},           {"q2", c.q2},
                {"r1", c.r1},           {"r2", c.r2},
                {"steps", c.steps},     {"init_mean1", c.init_mean1},
                {"init_mean2", c.init_mean2}, {"init_var1", c.init_var1},
                {"init_var2", c.init_var2}};
}

inline void apply_json(LinearToyConfig& c, const Json& j) {
    detail::require_object(j, "linear block");
    for (const auto& [key, v] : j.items()) {
        const std::string k = "linear." + key;
        if (key == "q1") c.q1 = detail::get_double(v, k);
        else if (key == "q2") c.q2 = detail::get_double(v, k);
        else if (key == "r1") c.r1 = detail::get_double(v, k);
        else if (key == "r2") c.r2 = detail::get_double(v, k);
        else if (key == "steps") c.steps = detail::get_int(v, k);
        else if (key == "init_mean1") c.init_mean1 = detail::get_double(v, k);
        else if (key == "init_mean2") c.init_mean2 = detail::get_double(v, k);
        else if (key == "init_var1") c.init_var1 = detail::get_double(v, k);
        else if (key == "init_var2") c.init_var2 = detail::get_double(v, k);
        else throw ConfigError("unknown config key '" + k + "'");
    }
}

inline Json to_json(const NonlinearConfig& c) {
    using detail::vec3_json;
    const auto& t = c.trajectory;
    return Json{{"accel_std", c.accel_std},
                {"gyro_std", c.gyro_std},
                {"mag_std", c.mag_std},
                {"posmeas_std", c.posmeas_std},
                {"init_pos_std", c.init_pos_std},
                {"init_vel_std", c.init_vel_std},
                {"init_att_std", c.init_att_std},
                {"imu_rate", c.imu_rate},
                {"posmeas_rate", c.posmeas_rate},
                {"duration", c.duration},
                {"lever_arm", vec3_json(c.lever_arm)},
                {"gravity", vec3_json(c.gravity)},
                {"mag_reference", vec3_json(c.mag_reference)},
                {"accel_threshold", c.accel_threshold},
                {"ahrs_accel_aiding_std", c.ahrs_accel_aiding_std},
                {"ahrs_accel_min_interval", c.ahrs_accel_min_interval},
                {"pos_center", vec3_json(t.pos_center)},
                {"pos_amplitude", vec3_json(t.pos_amplitude)},
                {"pos_freq_hz", vec3_json(t.pos_freq_hz)},
                {"pos_phase", vec3_json(t.pos_phase)},
                {"omega_amplitude", vec3_json(t.omega_amplitude)},
                {"omega_freq_hz", vec3_json(t.omega_freq_hz)},
                {"omega_phase", vec3_json(t.omega_phase)}};
}

inline void apply_json(NonlinearConfig& c, const Json& j) {
    detail::require_object(j, "nonlinear block");
    auto& t = c.trajectory;
    for (const auto& [key, v] : j.items()) {
        const std::string k = "nonlinear." + key;
        using detail::get_double;
        using detail::get_vec3;
        if (key == "accel_std") c.accel_std = get_double(v, k);
        else if (key == "gyro_std") c.gyro_std = get_double(v, k);
        else if (key == "mag_std") c.mag_std = get_double(v, k);
        else if (key == "posmeas_std") c.posmeas_std = get_double(v, k);
        else if (key == "init_pos_std") c.init_pos_std = get_double(v, k);
        else if (key == "init_vel_std") c.init_vel_std = get_double(v, k);
        else if (key == "init_att_std") c.init_att_std = get_double(v, k);
        else if (key == "imu_rate") c.imu_rate = get_double(v, k);
        else if (key == "posmeas_rate") c.posmeas_rate = get_double(v, k);
        else if (key == "duration") c.duration = get_double(v, k);
        else if (key == "lever_arm") c.lever_arm = get_vec3(v, k);
        else if (key == "gravity") c.gravity = get_vec3(v, k);
        else if (key == "mag_reference") c.mag_reference = get_vec3(v, k);
        else if (key == "accel_threshold") c.accel_threshold = get_double(v, k);
        else if (key == "ahrs_accel_aiding_std") c.ahrs_accel_aiding_std = get_double(v, k);
        else if (key == "ahrs_accel_min_interval") c.ahrs_accel_min_interval = get_double(v, k);
        else if (key == "pos_center") t.pos_center = get_vec3(v, k);
        else if (key == "pos_amplitude") t.pos_amplitude = get_vec3(v, k);
        else if (key == "pos_freq_hz") t.pos_freq_hz = get_vec3(v, k);
        else if (key == "pos_phase") t.pos_phase = get_vec3(v, k);
        else if (key == "omega_amplitude") t.omega_amplitude = get_vec3(v, k);
        else if (key == "omega_freq_hz") t.omega_freq_hz = get_vec3(v, k);
        else if (key == "omega_phase") t.omega_phase = get_vec3(v, k);
        else throw ConfigError("unknown config key '" + k + "'");
    }
}

inline Json to_json(const RunConfig& c) {
    Json est = Json::array();
    for (auto e : c.estimators) est.push_back(std::string(estimator_name(e)));
    return Json{{"scenario", std::string(scenario_name(c.scenario))},
                {"estimators", est},
                {"n_trials", c.n_trials},
                {"seed", c.seed},
                {"spci_weight", c.options.spci_weight},
                {"deflation_beta", c.options.cascade.deflation_beta},
                {"correction_form", c.options.cascade.form == CorrectionForm::kMarginal ? "marginal" : "conditional"},
                {"cooperative_psi", c.options.cooperative_psi},
                {"workers", c.workers},
                {"errors_trials", c.errors_trials},
                {"errors_stride", c.errors_stride},
                {"linear", to_json(c.linear)},
                {"nonlinear", to_json(c.nonlinear)}};
}

/// Overlays `j` onto `c`. The scenario key is optional; the CLI subcommand
/// decides it otherwise.
inline void apply_json(RunConfig& c, const Json& j) {
    detail::require_object(j, "config");
    for (const auto& [key, v] : j.items()) {
        if (key == "scenario") {
            if (!v.is_string()) throw ConfigError("config key 'scenario' must be a string");
            const auto s = v.get<std::string>();
            if (s == "linear") c.scenario = Scenario::kLinear;
            else if (s == "nonlinear") c.scenario = Scenario::kNonlinear;
            else throw ConfigError("scenario must be 'linear' or 'nonlinear'");
        } else if (key == "estimators") {
            if (!v.is_array()) throw ConfigError("config key 'estimators' must be an array of names");
            c.estimators.clear();
            for (const auto& e : v) {
                if (!e.is_string()) throw ConfigError("estimator names must be strings");
                c.estimators.push_back(parse_estimator(e.get<std::string>()));
            }
        } else if (key == "n_trials") {
            c.n_trials = detail::get_int(v, key);
        } else if (key == "seed") {
            if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<long long>() >= 0)) {
                throw ConfigError("config key 'seed' must be a non-negative integer");
            }
            c.seed = v.get<std::uint64_t>();
        } else if (key == "spci_weight") {
            c.options.spci_weight = detail::get_double(v, key);
        } else if (key == "deflation_beta") {
            c.options.cascade.deflation_beta = detail::get_double(v, key);
        } else if (key == "correction_form") {
            const auto s = v.is_string() ? v.get<std::string>() : std::string();
            if (s == "marginal") c.options.cascade.form = CorrectionForm::kMarginal;
            else if (s == "conditional") c.options.cascade.form = CorrectionForm::kConditional;
            else throw ConfigError("correction_form must be 'marginal' or 'conditional'");
        } else if (key == "cooperative_psi") {
            c.options.cooperative_psi = detail::get_bool(v, key);
        } else if (key == "workers") {
            c.workers = detail::get_int(v, key);
        } else if (key == "errors_trials") {
            c.errors_trials = detail::get_int(v, key);
        } else if (key == "errors_stride") {
            c.errors_stride = detail::get_int(v, key);
        } else if (key == "linear") {
            apply_json(c.linear, v);
        } else if (key == "nonlinear") {
            apply_json(c.nonlinear, v);
        } else {
            throw ConfigError("unknown config key '" + key + "'");
        }
    }
}

inline Json read_json_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path.string());
    try {
        return Json::parse(in);
    } catch (const Json::parse_error& e) {
        throw ConfigError("config file " + path.string() + ": " + e.what());
    }
}

// ---------------------------------------------------------------------------
// Results

inline Json summary_json(const RunResult& r, const std::string& git_describe) {
    Json rmse = Json::object();
    Json coverage = Json::object();
    Json nees = Json::object();
    Json kl = Json::object();
    for (const auto& c : r.channels) {
        Json groups = Json::object();
        for (std::size_t g = 0; g < c.spec.groups.size(); ++g) {
            groups[c.spec.groups[g].name] = c.group_rmse.empty() ? Json(nullptr) : Json(c.group_rmse[g]);
        }
        rmse[c.spec.name] = groups;
        coverage[c.spec.name] = c.coverage;
        nees[c.spec.name] = Json{{"dof", c.spec.dof},
                                 {"lower", c.nees.lower},
                                 {"upper", c.nees.upper},
                                 {"fraction_within", c.nees.fraction_within()},
                                 {"fraction_above", c.nees.fraction_above()}};
        if (c.spec.has_kl) kl[c.spec.name] = Json{{"median_of_mean", c.kl_median}};
    }
    return Json{{"git_describe", git_describe},
                {"n_trials", r.config.n_trials},
                {"n_used", r.n_used},
                {"flagged_trials", r.flagged.size()},
                {"flagged",
                 [&] {
                     Json a = Json::array();
                     for (const auto& f : r.flagged) a.push_back({{"trial", f.trial}, {"seed", f.seed}, {"reason", f.reason}});
                     return a;
                 }()},
                {"rmse",
                 {{"definition", "sqrt of the mean squared error norm over all steps and trials; attitude uses the "
                                 "world-frame tangent error, whose norm is the geodesic angle"},
                  {"values", rmse}}},
                {"three_sigma_coverage", coverage},
                {"nees",
                 {{"bounds", "two-sided 95% chi-square bounds on the trial-averaged NEES (Wilson-Hilferty quantiles)"},
                  {"pass_rule", "operationalization: consistent when epsilon_bar lies within bounds for at least 90% "
                                "of steps; not a criterion stated by the method's authors"},
                  {"values", nees}}},
                {"kl_vs_full", kl},
                {"config", to_json(r.config)}};
}

namespace detail {

inline std::ofstream open_out(const std::filesystem::path& p) {
    std::ofstream out(p, std::ios::binary);
    if (!out) throw Error("cannot write " + p.string());
    return out;
}

}  // namespace detail

/// Writes <dir>/<channel>/{nees,errors,kl,deflations}.csv and <dir>/summary.json.
inline void write_results(const RunResult& r, const std::filesystem::path& dir, const std::string& git_describe) {
    using detail::fmt_double;
    std::filesystem::create_directories(dir);
    for (const auto& c : r.channels) {
        const auto sub = dir / c.spec.name;
        std::filesystem::create_directories(sub);
        {
            auto out = detail::open_out(sub / "nees.csv");
            out << "step,epsilon_bar,lower,upper\n";
            for (std::size_t k = 0; k < c.nees.epsilon_bar.size(); ++k) {
                out << k + 1 << ',' << fmt_double(c.nees.epsilon_bar[k]) << ',' << fmt_double(c.nees.lower) << ','
                    << fmt_double(c.nees.upper) << '\n';
            }
        }
        {
            auto out = detail::open_out(sub / "errors.csv");
            out << "trial,step,component,error,sigma\n";
            for (const auto& row : c.rows) {
                out << row.trial << ',' << row.row.step << ',' << row.row.component << ',' << fmt_double(row.row.error)
                    << ',' << fmt_double(row.row.sigma) << '\n';
            }
        }
        if (c.spec.has_kl) {
            auto out = detail::open_out(sub / "kl.csv");
            out << "step,kl\n";
            for (std::size_t k = 0; k < c.kl_mean.size(); ++k) out << k + 1 << ',' << fmt_double(c.kl_mean[k]) << '\n';
        }
        if (c.spec.has_deflations) {
            auto out = detail::open_out(sub / "deflations.csv");
            out << "step,mean_deflations\n";
            for (std::size_t k = 0; k < c.deflation_mean.size(); ++k) {
                out << k + 1 << ',' << fmt_double(c.deflation_mean[k]) << '\n';
            }
        }
    }
    auto out = detail::open_out(dir / "summary.json");
    out << summary_json(r, git_describe).dump(2) << '\n';
}

/// Plain-text table from a summary.json.
inline std::string format_report(const Json& summary) {
    std::ostringstream os;
    char line[256];
    os << "trials: " << summary.at("n_used").get<int>() << " used, " << summary.at("flagged_trials").get<int>()
       << " flagged\n";
    std::snprintf(line, sizeof line, "%-16s %-10s %12s %10s %10s %10s %10s\n", "channel", "group", "rmse", "nees_in",
                  "nees_above", "cov3s_min", "kl_median");
    os << line;
    const auto& rmse = summary.at("rmse").at("values");
    const auto& nees = summary.at("nees").at("values");
    const auto& cov = summary.at("three_sigma_coverage");
    const auto& kl = summary.at("kl_vs_full");
    for (const auto& [name, groups] : rmse.items()) {
        double cmin = 1.0;
        for (const auto& v : cov.at(name)) cmin = std::min(cmin, v.get<double>());
        const double within = nees.at(name).at("fraction_within").get<double>();
        const double above = nees.at(name).at("fraction_above").get<double>();
        const std::string klm =
            kl.contains(name) && kl.at(name).at("median_of_mean").is_number()
                ? detail::fmt_double(kl.at(name).at("median_of_mean").get<double>()).substr(0, 10)
                : "-";
        for (const auto& [group, value] : groups.items()) {
            std::snprintf(line, sizeof line, "%-16s %-10s %12.6g %10.3f %10.3f %10.4f %10s\n", name.c_str(),
                          group.c_str(), value.is_number() ? value.get<double>() : std::nan(""), within, above, cmin,
                          klm.c_str());
            os << line;
        }
    }
    os << "nees_in: fraction of steps inside the 95% bounds (pass rule >= 0.90 is an operationalization)\n";
    return os.str();
}

// ---------------------------------------------------------------------------
// Replay logs

struct ImuLogRow {
    double t;
    Vector3d gyro;
    Vector3d accel;
    Vector3d mag;
};

struct UwbLogRow {
    double t;
    Vector3d pos;
};

namespace detail {

inline std::vector<std::vector<double>> read_numeric_csv(const std::filesystem::path& path,
                                                         const std::vector<std::string>& header) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open " + path.string());
    std::string line;
    if (!std::getline(in, line)) throw ConfigError(path.string() + ": empty file");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::string expected;
    for (std::size_t i = 0; i < header.size(); ++i) expected += (i ? "," : "") + header[i];
    if (line != expected) throw ConfigError(path.string() + ": header must be '" + expected + "'");

    std::vector<std::vector<double>> rows;
    int line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::vector<double> row;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) {
            try {
                std::size_t used = 0;
                row.push_back(std::stod(cell, &used));
                if (used != cell.size()) throw std::invalid_argument(cell);
            } catch (const std::exception&) {
                throw ConfigError(path.string() + ":" + std::to_string(line_no) + ": bad number '" + cell + "'");
            }
        }
        if (row.size() != header.size()) {
            throw ConfigError(path.string() + ":" + std::to_string(line_no) + ": expected " +
                              std::to_string(header.size()) + " columns");
        }
        if (!rows.empty() && !(row[0] > rows.back()[0])) {
            throw ConfigError(path.string() + ":" + std::to_string(line_no) + ": timestamps must strictly increase");
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

}  // namespace detail

inline std::vector<ImuLogRow> read_imu_csv(const std::filesystem::path& path) {
    const auto rows =
        detail::read_numeric_csv(path, {"t", "gx", "gy", "gz", "ax", "ay", "az", "mx", "my", "mz"});
    std::vector<ImuLogRow> out;
    out.reserve(rows.size());
    for (const auto& r : rows) out.push_back({r[0], {r[1], r[2], r[3]}, {r[4], r[5], r[6]}, {r[7], r[8], r[9]}});
    return out;
}

inline std::vector<UwbLogRow> read_uwb_csv(const std::filesystem::path& path) {
    const auto rows = detail::read_numeric_csv(path, {"t", "px", "py", "pz"});
    std::vector<UwbLogRow> out;
    out.reserve(rows.size());
    for (const auto& r : rows) out.push_back({r[0], {r[1], r[2], r[3]}});
    return out;
}

}  // namespace cascade
