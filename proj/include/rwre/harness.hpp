#pragma once

#include <chrono>
#include <cstdint>
#include <ctime>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "rwre/direction.hpp"
#include "rwre/estimators.hpp"
#include "rwre/io.hpp"
#include "rwre/model.hpp"
#include "rwre/renewal.hpp"

namespace rwre {

constexpr const char* kToolVersion = "rwre 1.0.0";

/// Bad config or usage: maps to process exit code 2.
class ConfigError : public std::runtime_error {
  public:
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

inline const std::vector<std::string>& experiment_names() {
    static const std::vector<std::string> names{
        "validate",   "velocity",  "diffusion", "equilibrium", "variance-scan",
        "intersection-scan", "h-profile", "q-kernel",  "green",       "renewal",
        "clt",        "perturbation", "sigma-tail", "rationalize"};
    return names;
}

struct ExperimentConfig {
    std::string experiment;
    std::optional<ModelSpec> model;
    nlohmann::json params = nlohmann::json::object();
    std::uint64_t master_seed = 0;
    std::string output_dir = "out";
    nlohmann::json canonical;  // normalized config document (hashed into the manifest)
};

struct CheckResult {
    std::string name;
    bool pass = false;
    std::string detail;
};

struct RunManifest {
    std::string config_hash;
    std::string tool_version;
    std::string started_at;
    std::string finished_at;
    std::string experiment;
    std::vector<std::string> result_files;  // relative to output_dir
    bool checks_passed = true;
    std::filesystem::path output_dir;
};

// ---------------------------------------------------------------------------
// Config parsing.
// ---------------------------------------------------------------------------

inline ExperimentConfig parse_config(const nlohmann::json& j,
                                     const std::filesystem::path& base_dir = ".") {
    ExperimentConfig cfg;
    try {
        if (j.contains("experiment")) cfg.experiment = j.at("experiment").get<std::string>();
        if (j.contains("model")) {
            const auto& jm = j.at("model");
            if (jm.is_string()) {
                const std::filesystem::path p = base_dir / jm.get<std::string>();
                cfg.model = model_from_json(nlohmann::json::parse(read_file(p)));
            } else {
                cfg.model = model_from_json(jm);
            }
        }
        if (j.contains("params")) {
            if (!j.at("params").is_object()) throw ConfigError("params must be an object");
            cfg.params = j.at("params");
        }
        if (j.contains("master_seed")) cfg.master_seed = j.at("master_seed").get<std::uint64_t>();
        if (j.contains("output_dir")) cfg.output_dir = j.at("output_dir").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("config parse error: ") + e.what());
    } catch (const ModelError& e) {
        throw ConfigError(std::string("config model error: ") + e.what());
    }

    cfg.canonical = nlohmann::json::object();
    cfg.canonical["experiment"] = cfg.experiment;
    if (cfg.model) cfg.canonical["model"] = to_json(*cfg.model);
    cfg.canonical["params"] = cfg.params;
    cfg.canonical["master_seed"] = cfg.master_seed;
    return cfg;
}

inline ExperimentConfig load_config(const std::filesystem::path& path) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(read_file(path));
    } catch (const std::exception& e) {
        throw ConfigError(std::string("cannot parse config ") + path.string() + ": " + e.what());
    }
    return parse_config(j, path.parent_path());
}

namespace harness_detail {

inline std::string iso_now() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    char buf[32];
    std::tm tm{};
    gmtime_r(&t, &tm);
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

template <class T>
T param(const nlohmann::json& params, const std::string& key, const T& fallback) {
    if (!params.contains(key)) return fallback;
    try {
        return params.at(key).get<T>();
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("bad parameter '" + key + "': " + e.what());
    }
}

inline std::vector<std::int64_t> int_list(const nlohmann::json& params, const std::string& key,
                                          std::vector<std::int64_t> fallback) {
    return param<std::vector<std::int64_t>>(params, key, std::move(fallback));
}

inline nlohmann::json vec_to_json(const RealVec& v) {
    nlohmann::json a = nlohmann::json::array();
    for (int i = 0; i < v.dim(); ++i) a.push_back(v[i]);
    return a;
}

inline nlohmann::json mat_to_json(const SymMat& m) {
    nlohmann::json rows = nlohmann::json::array();
    for (int i = 0; i < m.dim(); ++i) {
        nlohmann::json row = nlohmann::json::array();
        for (int j = 0; j < m.dim(); ++j) row.push_back(m(i, j));
        rows.push_back(row);
    }
    return rows;
}

inline nlohmann::json scan_to_json(const ScanResult& scan) {
    nlohmann::json j;
    nlohmann::json pts = nlohmann::json::array();
    for (const auto& p : scan.points)
        pts.push_back({{"n", p.n}, {"value", p.value}, {"se", p.se}});
    j["points"] = pts;
    j["exponent_defined"] = scan.exponent_defined;
    if (scan.exponent_defined) {
        j["fitted_exponent"] = scan.fitted_exponent;
        j["exponent_se"] = scan.exponent_se;
    }
    return j;
}

inline std::string scan_to_csv(const ScanResult& scan) {
    CsvBuilder csv({"n", "value", "se"});
    for (const auto& p : scan.points)
        csv.row({std::to_string(p.n), format_double(p.value), format_double(p.se)});
    return csv.str();
}

inline nlohmann::json checks_to_json(const std::vector<CheckResult>& checks) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& c : checks)
        arr.push_back({{"name", c.name}, {"pass", c.pass}, {"detail", c.detail}});
    return arr;
}

inline LatticePoint point_param(const nlohmann::json& j) {
    LatticePoint p(static_cast<int>(j.size()));
    for (int i = 0; i < p.dim(); ++i) p[i] = j.at(static_cast<std::size_t>(i)).get<std::int64_t>();
    return p;
}

/// Empirical level-increment distribution of the regeneration cycles,
/// as input for the renewal experiment.
inline IntegerStepDist level_increment_dist(const ModelSpec& model, std::int64_t cycles,
                                            std::uint64_t seed) {
    std::map<std::int64_t, std::int64_t> counts;
    const LatticePoint origin(model.dimension);
    for (std::int64_t i = 0; i < cycles; ++i) {
        const Environment env(model, prf::split(seed, seed_role::kRenewal, 2 * i));
        Walker<Environment> w(env, origin, prf::split(seed, seed_role::kRenewal, 2 * i + 1));
        const std::int64_t before = w.level();
        w.advance_level();
        counts[w.level() - before] += 1;
    }
    IntegerStepDist dist;
    double total = 0.0;
    for (const auto& [v, c] : counts) {
        dist.entries.push_back({v, static_cast<double>(c) / static_cast<double>(cycles)});
        total += dist.entries.back().second;
    }
    // Exact renormalization against float drift.
    for (auto& [v, p] : dist.entries) p /= total;
    return dist;
}

}  // namespace harness_detail

// ---------------------------------------------------------------------------
// Experiment dispatch. Each experiment fills a result JSON, optional CSV
// files, and a list of checks evaluated against configured thresholds.
// ---------------------------------------------------------------------------

namespace harness_detail {

struct ExperimentOutput {
    nlohmann::json results;
    std::vector<std::pair<std::string, std::string>> csv_files;  // (name, content)
    std::vector<CheckResult> checks;
};

inline const ModelSpec& require_model(const ExperimentConfig& cfg) {
    if (!cfg.model) throw ConfigError("experiment '" + cfg.experiment + "' requires a model");
    return *cfg.model;
}

inline ExperimentOutput run_validate(const ExperimentConfig& cfg) {
    const ModelSpec& model = require_model(cfg);
    ExperimentOutput out;
    const ValidationReport rep = validate_model(model);
    out.results["forbidden_direction_ok"] = rep.forbidden_direction_ok;
    if (rep.nonnestling_delta) out.results["nonnestling_delta"] = *rep.nonnestling_delta;
    out.results["moment_bound_M"] = rep.moment_bound_M;
    out.results["ellipticity_2_3_ok"] = rep.ellipticity_2_3_ok;
    out.results["ellipticity_span_ok"] = rep.ellipticity_span_ok;
    nlohmann::json support = nlohmann::json::array();
    for (const auto& z : rep.support_J) support.push_back(to_json(z));
    out.results["support_J"] = support;

    out.checks.push_back({"forbidden_direction", rep.forbidden_direction_ok, ""});
    out.checks.push_back({"nonnestling", rep.nonnestling_delta.has_value(),
                          rep.nonnestling_delta ? "delta=" + format_double(*rep.nonnestling_delta)
                                                : "no uniform positive drift"});
    const bool allow_inelliptic = param(cfg.params, "allow_inelliptic", false);
    out.checks.push_back({"ellipticity", rep.elliptic() || allow_inelliptic,
                          rep.elliptic() ? "" : "model is inelliptic (warning class)"});
    return out;
}

inline ExperimentOutput run_velocity(const ExperimentConfig& cfg) {
    const auto est = estimate_velocity(require_model(cfg),
                                       param<std::int64_t>(cfg.params, "cycles", 100000),
                                       cfg.master_seed);
    ExperimentOutput out;
    out.results["v"] = vec_to_json(est.v);
    out.results["se"] = vec_to_json(est.se);
    out.results["mean_cycle_time"] = est.mean_cycle_time;
    out.results["mean_cycle_disp"] = vec_to_json(est.mean_cycle_disp);
    out.results["cycles"] = est.cycles;
    if (cfg.params.contains("expect_v")) {
        const auto expect = cfg.params.at("expect_v").get<std::vector<double>>();
        const double mult = param(cfg.params, "se_multiplier", 3.0);
        bool ok = true;
        for (int i = 0; i < est.v.dim(); ++i)
            if (std::abs(est.v[i] - expect[static_cast<std::size_t>(i)]) > mult * est.se[i])
                ok = false;
        out.checks.push_back({"velocity_expected", ok, ""});
    }
    return out;
}

inline ExperimentOutput run_diffusion(const ExperimentConfig& cfg) {
    const auto est = estimate_diffusion(require_model(cfg),
                                        param<std::int64_t>(cfg.params, "cycles", 100000),
                                        cfg.master_seed);
    ExperimentOutput out;
    out.results["matrix"] = mat_to_json(est.matrix);
    out.results["se"] = mat_to_json(est.se);
    out.results["cycles"] = est.cycles;

    CsvBuilder csv({"i", "j", "value", "se"});
    for (int i = 0; i < est.matrix.dim(); ++i)
        for (int j = 0; j < est.matrix.dim(); ++j)
            csv.row({std::to_string(i), std::to_string(j), format_double(est.matrix(i, j)),
                     format_double(est.se(i, j))});
    out.csv_files.push_back({"diffusion_matrix.csv", csv.str()});

    if (cfg.params.contains("expect_matrix")) {
        const auto expect = cfg.params.at("expect_matrix").get<std::vector<std::vector<double>>>();
        const double mult = param(cfg.params, "se_multiplier", 3.0);
        const double floor = param(cfg.params, "abs_floor", 0.0);
        bool ok = true;
        for (int i = 0; i < est.matrix.dim(); ++i)
            for (int j = 0; j < est.matrix.dim(); ++j) {
                const double tol = std::max(mult * est.se(i, j), floor);
                if (std::abs(est.matrix(i, j) -
                             expect[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)]) > tol)
                    ok = false;
            }
        out.checks.push_back({"diffusion_expected", ok, ""});
    }
    return out;
}

inline ExperimentOutput run_equilibrium(const ExperimentConfig& cfg) {
    const ModelSpec& model = require_model(cfg);
    const std::string functional = param<std::string>(cfg.params, "functional", "drift");
    const int k = param(cfg.params, "k", 0);
    const std::int64_t cycles = param<std::int64_t>(cfg.params, "cycles", 100000);

    ExperimentOutput out;
    out.results["functional"] = functional;
    out.results["k"] = k;
    if (functional == "drift") {
        const auto est = estimate_equilibrium(model, drift_functional, k, cycles, cfg.master_seed);
        out.results["value"] = vec_to_json(est.value);
        out.results["se"] = vec_to_json(est.std_error);
        out.results["replicas"] = est.replicas;
    } else if (functional == "one") {
        const auto est = estimate_equilibrium(
            model, [](const ShiftedEnvironment<Environment>&) { return 1.0; }, k, cycles,
            cfg.master_seed);
        out.results["value"] = est.value;
        out.results["se"] = est.std_error;
        out.results["replicas"] = est.replicas;
    } else if (functional == "drift_dot_u") {
        const auto est = estimate_equilibrium(
            model,
            [&model](const ShiftedEnvironment<Environment>& view) {
                return dot(drift(view.site_law(LatticePoint(model.dimension))), model.u_hat);
            },
            k, cycles, cfg.master_seed);
        out.results["value"] = est.value;
        out.results["se"] = est.std_error;
        out.results["replicas"] = est.replicas;
    } else {
        throw ConfigError("unknown equilibrium functional '" + functional +
                          "' (expected one|drift|drift_dot_u)");
    }
    return out;
}

inline void exponent_checks(const ExperimentConfig& cfg, const ScanResult& scan,
                            ExperimentOutput& out) {
    if (cfg.params.contains("max_exponent")) {
        const double bound = cfg.params.at("max_exponent").get<double>();
        const bool ok = scan.exponent_defined && scan.fitted_exponent <= bound;
        out.checks.push_back({"max_exponent", ok,
                              scan.exponent_defined
                                  ? "fitted=" + format_double(scan.fitted_exponent)
                                  : "exponent undefined"});
    }
    if (cfg.params.contains("exponent_above_zero_z")) {
        const double z = cfg.params.at("exponent_above_zero_z").get<double>();
        const bool ok = scan.exponent_defined && scan.fitted_exponent > z * scan.exponent_se;
        out.checks.push_back({"exponent_above_zero", ok, ""});
    }
}

inline ExperimentOutput run_variance_scan(const ExperimentConfig& cfg) {
    const auto scan = variance_scan(require_model(cfg),
                                    int_list(cfg.params, "n_list", {64, 128, 256, 512}),
                                    param<std::int64_t>(cfg.params, "env_count", 200),
                                    cfg.master_seed);
    ExperimentOutput out;
    out.results = scan_to_json(scan);
    out.csv_files.push_back({"variance_scan.csv", scan_to_csv(scan)});
    exponent_checks(cfg, scan, out);
    return out;
}

inline ExperimentOutput run_intersection_scan(const ExperimentConfig& cfg) {
    const auto scan = intersection_scan(
        require_model(cfg), int_list(cfg.params, "n_list", {128, 256, 512, 1024, 2048, 4096}),
        param<std::int64_t>(cfg.params, "pair_count", 2000), cfg.master_seed);
    ExperimentOutput out;
    out.results = scan_to_json(scan);
    out.csv_files.push_back({"intersection_scan.csv", scan_to_csv(scan)});
    exponent_checks(cfg, scan, out);
    return out;
}

inline ExperimentOutput run_h_profile(const ExperimentConfig& cfg) {
    const ModelSpec& model = require_model(cfg);
    const std::int64_t reps = param<std::int64_t>(cfg.params, "reps", 20000);
    std::vector<LatticePoint> states;
    if (cfg.params.contains("states")) {
        for (const auto& js : cfg.params.at("states")) states.push_back(point_param(js));
    } else {
        // Default profile for d=2 with u=(1,0): transverse band |t| <= radius.
        if (model.dimension != 2)
            throw ConfigError("h-profile default band requires d=2; pass explicit states");
        const std::int64_t radius = param<std::int64_t>(cfg.params, "radius", 8);
        for (std::int64_t t = -radius; t <= radius; ++t)
            states.push_back(LatticePoint{0, t});
    }

    ExperimentOutput out;
    CsvBuilder csv({"state", "value", "se"});
    nlohmann::json rows = nlohmann::json::array();
    double total = 0.0;
    for (std::size_t i = 0; i < states.size(); ++i) {
        const auto est = estimate_h(model, states[i], reps,
                                    prf::split(cfg.master_seed, seed_role::kHEnv + 100, i));
        rows.push_back({{"state", to_json(states[i])},
                        {"value", est.value},
                        {"se", est.std_error}});
        csv.row({states[i].to_string(), format_double(est.value), format_double(est.std_error)});
        total += est.value;
    }
    out.results["profile"] = rows;
    out.results["band_sum"] = total;
    out.results["reps"] = reps;
    out.csv_files.push_back({"h_profile.csv", csv.str()});
    return out;
}

inline ExperimentOutput run_q_kernel(const ExperimentConfig& cfg) {
    const ModelSpec& model = require_model(cfg);
    const std::int64_t reps = param<std::int64_t>(cfg.params, "reps", 100000);
    std::vector<LatticePoint> states;
    if (cfg.params.contains("states"))
        for (const auto& js : cfg.params.at("states")) states.push_back(point_param(js));
    else
        states = {LatticePoint(model.dimension)};

    ExperimentOutput out;
    nlohmann::json rows = nlohmann::json::array();
    const double mult = param(cfg.params, "se_multiplier", 3.0);
    bool martingale_ok = true;
    double max_holding_upper = 0.0, max_moment = 0.0;
    for (std::size_t i = 0; i < states.size(); ++i) {
        const auto q = estimate_q(model, states[i], reps,
                                  prf::split(cfg.master_seed, seed_role::kQEnv + 100, i));
        rows.push_back({{"state", to_json(q.state_x)},
                        {"mean_increment", vec_to_json(q.mean_increment)},
                        {"mean_increment_se", vec_to_json(q.mean_increment_se)},
                        {"p_hat_moment", q.p_hat_moment},
                        {"p_hat_moment_se", q.p_hat_moment_se},
                        {"holding_prob", q.holding_prob},
                        {"holding_prob_se", q.holding_prob_se},
                        {"replicas", q.replicas}});
        for (int c = 0; c < model.dimension; ++c)
            if (std::abs(q.mean_increment[c]) > mult * std::max(q.mean_increment_se[c], 1e-12))
                martingale_ok = false;
        max_holding_upper =
            std::max(max_holding_upper, q.holding_prob + mult * q.holding_prob_se);
        max_moment = std::max(max_moment, q.p_hat_moment);
    }
    out.results["states"] = rows;
    if (param(cfg.params, "check_martingale", false))
        out.checks.push_back({"mean_increment_zero", martingale_ok, ""});
    if (cfg.params.contains("min_epsilon")) {
        const double eps = cfg.params.at("min_epsilon").get<double>();
        out.checks.push_back({"holding_prob_bounded", max_holding_upper <= 1.0 - eps,
                              "max upper=" + format_double(max_holding_upper)});
    }
    if (cfg.params.contains("max_p_hat_moment"))
        out.checks.push_back({"p_hat_moment_bounded",
                              max_moment <= cfg.params.at("max_p_hat_moment").get<double>(),
                              "max=" + format_double(max_moment)});
    return out;
}

inline ExperimentOutput run_green(const ExperimentConfig& cfg) {
    const ModelSpec& model = require_model(cfg);
    const LatticePoint x = cfg.params.contains("x") ? point_param(cfg.params.at("x"))
                                                    : LatticePoint(model.dimension);
    const LatticePoint y = cfg.params.contains("y") ? point_param(cfg.params.at("y"))
                                                    : LatticePoint(model.dimension);
    const auto scan = green_function(model, x, y,
                                     int_list(cfg.params, "n_list", {16, 32, 64, 128, 256}),
                                     param<std::int64_t>(cfg.params, "chains", 10000),
                                     cfg.master_seed);
    ExperimentOutput out;
    out.results = scan_to_json(scan);
    out.results["x"] = to_json(x);
    out.results["y"] = to_json(y);
    out.csv_files.push_back({"green_scan.csv", scan_to_csv(scan)});
    exponent_checks(cfg, scan, out);
    return out;
}

inline ExperimentOutput run_renewal(const ExperimentConfig& cfg) {
    IntegerStepDist dist;
    if (cfg.params.contains("dist")) {
        for (const auto& e : cfg.params.at("dist"))
            dist.entries.push_back({e.at(0).get<std::int64_t>(), e.at(1).get<double>()});
    } else if (cfg.params.contains("dist_from_model_cycles")) {
        dist = level_increment_dist(require_model(cfg),
                                    cfg.params.at("dist_from_model_cycles").get<std::int64_t>(),
                                    prf::split(cfg.master_seed, seed_role::kRenewal, 999));
    } else {
        throw ConfigError("renewal requires 'dist' or 'dist_from_model_cycles'");
    }
    dist.validate();

    const auto i_list = int_list(cfg.params, "i_list", {0, 5, 10, 15, 20, 25, 30, 35, 40, 45, 50});
    const auto j_list = int_list(cfg.params, "j_list", i_list);
    const auto r_list = param<std::vector<double>>(cfg.params, "r_list", {1.0, 2.0});
    const std::int64_t reps = param<std::int64_t>(cfg.params, "reps", 100000);

    ExperimentOutput out;
    nlohmann::json dj = nlohmann::json::array();
    for (const auto& [v, p] : dist.entries) dj.push_back({v, p});
    out.results["dist"] = dj;
    out.results["reps"] = reps;

    CsvBuilder csv({"r", "i", "j", "value", "se", "normalized"});
    nlohmann::json rows = nlohmann::json::array();
    bool ratio_ok = true;
    for (const double r : r_list) {
        double max_norm = 0.0, min_norm = std::numeric_limits<double>::infinity();
        for (const std::int64_t i : i_list) {
            for (const std::int64_t j : j_list) {
                const auto est = renewal_common_level(
                    dist, i, j, reps, r,
                    prf::split(cfg.master_seed, seed_role::kRenewal,
                               prf::hash({static_cast<std::uint64_t>(i), static_cast<std::uint64_t>(j),
                                          static_cast<std::uint64_t>(r * 16)})));
                const double denom = 1.0 + std::pow(static_cast<double>(i), r) +
                                     std::pow(static_cast<double>(j), r);
                const double normalized = est.value / denom;
                max_norm = std::max(max_norm, normalized);
                min_norm = std::min(min_norm, normalized);
                rows.push_back({{"r", r}, {"i", i}, {"j", j}, {"value", est.value},
                                {"se", est.std_error}, {"normalized", normalized}});
                csv.row({format_double(r), std::to_string(i), std::to_string(j),
                         format_double(est.value), format_double(est.std_error),
                         format_double(normalized)});
            }
        }
        if (cfg.params.contains("max_normalized_ratio") &&
            max_norm / min_norm > cfg.params.at("max_normalized_ratio").get<double>())
            ratio_ok = false;
    }
    out.results["grid"] = rows;
    out.csv_files.push_back({"renewal_grid.csv", csv.str()});
    if (cfg.params.contains("max_normalized_ratio"))
        out.checks.push_back({"normalized_moment_ratio", ratio_ok, ""});

    // Exact identity L_{i,i} = i for i > 0, every replica.
    if (param(cfg.params, "check_identity", true)) {
        bool identity_ok = true;
        const std::int64_t identity_reps = std::min<std::int64_t>(reps, 100000);
        for (const std::int64_t i : i_list) {
            if (i <= 0 || i % dist.span() != 0) continue;
            for (std::int64_t rep = 0; rep < identity_reps; ++rep)
                if (sample_common_level(dist, i, i,
                                        prf::split(cfg.master_seed, seed_role::kRenewal, 4242),
                                        static_cast<std::uint64_t>(rep)) != i)
                    identity_ok = false;
        }
        out.checks.push_back({"identity_L_ii", identity_ok, ""});
    }
    return out;
}

inline ExperimentOutput run_clt(const ExperimentConfig& cfg) {
    const ModelSpec& model = require_model(cfg);
    const auto env_seeds = param<std::vector<std::uint64_t>>(cfg.params, "env_seeds", {1, 2, 3, 4, 5});
    const std::int64_t n = param<std::int64_t>(cfg.params, "n", 10000);
    const std::int64_t walks = param<std::int64_t>(cfg.params, "walks", 10000);
    const std::int64_t ref_cycles = param<std::int64_t>(cfg.params, "reference_cycles", 1000000);
    const auto gaps = int_list(cfg.params, "gap_horizons", {n / 10, n});

    ExperimentOutput out;
    nlohmann::json rows = nlohmann::json::array();
    double worst_frob = 0.0, worst_ks = 0.0;
    bool gaps_decreasing = true;
    for (std::size_t e = 0; e < env_seeds.size(); ++e) {
        const auto rep = clt_test(model, env_seeds[e], n, walks,
                                  prf::split(cfg.master_seed, seed_role::kCltWalk + 100, e),
                                  ref_cycles, gaps);
        nlohmann::json row;
        row["env_seed"] = env_seeds[e];
        row["covariance"] = mat_to_json(rep.covariance);
        row["frob_rel"] = rep.frob_rel;
        row["ks"] = rep.ks;
        row["degenerate"] = rep.degenerate;
        nlohmann::json gj = nlohmann::json::array();
        for (const auto& [h, g] : rep.centering_gaps) gj.push_back({{"horizon", h}, {"gap", g}});
        row["centering_gaps"] = gj;
        row["v_ref"] = vec_to_json(rep.v_ref);
        row["d_ref"] = mat_to_json(rep.d_ref);
        rows.push_back(row);

        worst_frob = std::max(worst_frob, rep.frob_rel);
        for (const double k : rep.ks)
            if (!std::isnan(k)) worst_ks = std::max(worst_ks, k);
        for (std::size_t g = 1; g < rep.centering_gaps.size(); ++g)
            if (rep.centering_gaps[g].second > rep.centering_gaps[g - 1].second)
                gaps_decreasing = false;
    }
    out.results["environments"] = rows;
    out.results["n"] = n;
    out.results["walks"] = walks;
    if (cfg.params.contains("max_frob_rel"))
        out.checks.push_back({"covariance_frobenius", worst_frob <= cfg.params.at("max_frob_rel").get<double>(),
                              "worst=" + format_double(worst_frob)});
    if (cfg.params.contains("max_ks"))
        out.checks.push_back({"ks_normality", worst_ks <= cfg.params.at("max_ks").get<double>(),
                              "worst=" + format_double(worst_ks)});
    if (param(cfg.params, "check_gap_decreasing", false))
        out.checks.push_back({"centering_gap_decreasing", gaps_decreasing, ""});
    return out;
}

inline ExperimentOutput run_perturbation(const ExperimentConfig& cfg) {
    const ModelSpec& model = require_model(cfg);
    const std::int64_t n = param<std::int64_t>(cfg.params, "n", 20);
    const std::int64_t env_reps = param<std::int64_t>(cfg.params, "env_reps", 1);
    const std::int64_t resample_reps = param<std::int64_t>(cfg.params, "resample_reps", 200);
    std::vector<LatticePoint> sites;
    if (cfg.params.contains("sites"))
        for (const auto& js : cfg.params.at("sites")) sites.push_back(point_param(js));
    else
        throw ConfigError("perturbation requires 'sites'");

    ExperimentOutput out;
    CsvBuilder csv({"site", "left", "left_se", "right", "right_se"});
    nlohmann::json rows = nlohmann::json::array();
    bool zero_consistent = true;
    double fitted_c = 0.0;
    for (std::size_t i = 0; i < sites.size(); ++i) {
        const auto res = perturbation_influence(
            model, sites[i], n, env_reps, resample_reps,
            prf::split(cfg.master_seed, seed_role::kPerturbEnv + 100, i));
        rows.push_back({{"site", to_json(sites[i])},
                        {"left", res.left.value},
                        {"left_se", res.left.std_error},
                        {"right", res.right.value},
                        {"right_se", res.right.std_error}});
        csv.row({sites[i].to_string(), format_double(res.left.value),
                 format_double(res.left.std_error), format_double(res.right.value),
                 format_double(res.right.std_error)});
        if (res.right.value <= 0.0 && res.left.value > 0.0) zero_consistent = false;
        if (res.right.value > 0.0) fitted_c = std::max(fitted_c, res.left.value / res.right.value);
    }
    out.results["sites"] = rows;
    out.results["fitted_C"] = fitted_c;
    out.results["n"] = n;
    out.csv_files.push_back({"perturbation.csv", csv.str()});
    if (param(cfg.params, "check_zero_consistency", true))
        out.checks.push_back({"left_zero_when_right_zero", zero_consistent, ""});
    if (cfg.params.contains("max_fitted_C"))
        out.checks.push_back({"fitted_C_bounded",
                              fitted_c <= cfg.params.at("max_fitted_C").get<double>(),
                              "C=" + format_double(fitted_c)});
    return out;
}

inline ExperimentOutput run_sigma_tail(const ExperimentConfig& cfg) {
    const auto scan = sigma_tail(require_model(cfg),
                                 param<std::int64_t>(cfg.params, "reps", 1000000),
                                 cfg.master_seed, param<std::int64_t>(cfg.params, "n_max", 30));
    ExperimentOutput out;
    out.results = scan_to_json(scan);
    out.results["tail_identically_zero"] = scan.points.empty();
    out.csv_files.push_back({"sigma_tail.csv", scan_to_csv(scan)});
    if (cfg.params.contains("slope_negative_z")) {
        const double z = cfg.params.at("slope_negative_z").get<double>();
        // A tail that is identically zero decays faster than any geometric
        // rate, so the bound holds trivially in the degenerate case.
        const bool ok = scan.points.empty() ||
                        (scan.exponent_defined &&
                         scan.fitted_exponent + z * scan.exponent_se < 0.0);
        out.checks.push_back({"tail_slope_negative", ok,
                              scan.points.empty() ? "tail identically zero (degenerate)" : ""});
    }
    return out;
}

inline ExperimentOutput run_rationalize(const ExperimentConfig& cfg) {
    ExperimentOutput out;
    try {
        out.results = direction_result_to_json(rationalize_from_json(cfg.params));
        out.checks.push_back({"sign_pattern", true, ""});
    } catch (const DirectionError& e) {
        out.results["error"] = e.what();
        out.checks.push_back({"sign_pattern", false, e.what()});
    }
    return out;
}

}  // namespace harness_detail

/// Execute one experiment config: runs the estimator, persists result JSON
/// and CSVs under output_dir, writes the manifest atomically, and returns it.
/// Result files carry no timestamps, so a re-run with the same seed is
/// byte-identical; wall-clock times live only in the manifest.
inline RunManifest run(const ExperimentConfig& cfg) {
    using namespace harness_detail;
    if (cfg.experiment.empty()) throw ConfigError("config is missing 'experiment'");
    const auto& names = experiment_names();
    if (std::find(names.begin(), names.end(), cfg.experiment) == names.end())
        throw ConfigError("unknown experiment '" + cfg.experiment + "'");

    RunManifest manifest;
    manifest.started_at = iso_now();
    manifest.experiment = cfg.experiment;
    manifest.config_hash = fnv1a_hex(cfg.canonical.dump());
    manifest.tool_version = kToolVersion;
    manifest.output_dir = cfg.output_dir;

    ExperimentOutput out;
    if (cfg.experiment == "validate") out = run_validate(cfg);
    else if (cfg.experiment == "velocity") out = run_velocity(cfg);
    else if (cfg.experiment == "diffusion") out = run_diffusion(cfg);
    else if (cfg.experiment == "equilibrium") out = run_equilibrium(cfg);
    else if (cfg.experiment == "variance-scan") out = run_variance_scan(cfg);
    else if (cfg.experiment == "intersection-scan") out = run_intersection_scan(cfg);
    else if (cfg.experiment == "h-profile") out = run_h_profile(cfg);
    else if (cfg.experiment == "q-kernel") out = run_q_kernel(cfg);
    else if (cfg.experiment == "green") out = run_green(cfg);
    else if (cfg.experiment == "renewal") out = run_renewal(cfg);
    else if (cfg.experiment == "clt") out = run_clt(cfg);
    else if (cfg.experiment == "perturbation") out = run_perturbation(cfg);
    else if (cfg.experiment == "sigma-tail") out = run_sigma_tail(cfg);
    else if (cfg.experiment == "rationalize") out = run_rationalize(cfg);

    const std::filesystem::path dir(cfg.output_dir);
    std::filesystem::create_directories(dir);

    nlohmann::json result;
    result["experiment"] = cfg.experiment;
    result["tool_version"] = kToolVersion;
    result["inputs"] = cfg.canonical;
    result["results"] = out.results;
    result["checks"] = checks_to_json(out.checks);

    const std::string result_name = cfg.experiment + "_result.json";
    write_file(dir / result_name, result.dump(2) + "\n");
    manifest.result_files.push_back(result_name);
    for (const auto& [name, content] : out.csv_files) {
        write_file(dir / name, content);
        manifest.result_files.push_back(name);
    }

    manifest.checks_passed = true;
    for (const auto& c : out.checks)
        if (!c.pass) manifest.checks_passed = false;

    manifest.finished_at = iso_now();
    nlohmann::json mj;
    mj["config_hash"] = manifest.config_hash;
    mj["tool_version"] = manifest.tool_version;
    mj["experiment"] = manifest.experiment;
    mj["started_at"] = manifest.started_at;
    mj["finished_at"] = manifest.finished_at;
    mj["result_files"] = manifest.result_files;
    mj["checks_passed"] = manifest.checks_passed;
    atomic_write(dir / "manifest.json", mj.dump(2) + "\n");
    return manifest;
}

/// Summarize manifests from one or more run directories into a one-page
/// table; returns false if any manifest is missing or corrupt.
inline bool report(const std::vector<std::string>& dirs, std::ostream& os,
                   std::string* csv_out = nullptr) {
    CsvBuilder csv({"directory", "experiment", "headline", "exponent", "checks"});
    os << "experiment        | headline                                   | exponent        | checks\n";
    os << "------------------+--------------------------------------------+-----------------+-------\n";
    bool ok = true;
    for (const auto& dir : dirs) {
        nlohmann::json manifest;
        try {
            manifest = nlohmann::json::parse(read_file(std::filesystem::path(dir) / "manifest.json"));
        } catch (const std::exception& e) {
            os << dir << ": missing or corrupt manifest (" << e.what() << ")\n";
            ok = false;
            continue;
        }
        std::string headline, exponent;
        std::string experiment = manifest.value("experiment", "?");
        try {
            const auto result = nlohmann::json::parse(
                read_file(std::filesystem::path(dir) / (experiment + "_result.json")));
            const auto& r = result.at("results");
            if (r.contains("v"))
                headline = "v=" + r.at("v").dump() + " +- " + r.at("se").dump();
            else if (r.contains("matrix"))
                headline = "D=" + r.at("matrix").dump();
            else if (r.contains("value"))
                headline = "value=" + r.at("value").dump() + " +- " + r.at("se").dump();
            else if (r.contains("u_hat"))
                headline = "u_hat=" + r.at("u_hat").dump();
            else if (r.contains("forbidden_direction_ok"))
                headline = std::string("forbidden_ok=") +
                           (r.at("forbidden_direction_ok").get<bool>() ? "true" : "false") +
                           " elliptic_2_3=" +
                           (r.at("ellipticity_2_3_ok").get<bool>() ? "true" : "false");
            else if (r.contains("fitted_C"))
                headline = "fitted_C=" + r.at("fitted_C").dump();
            else if (r.contains("points") && !r.at("points").empty())
                headline = "points=" + std::to_string(r.at("points").size()) + " last=" +
                           r.at("points").back().at("value").dump();
            else
                headline = "-";
            if (r.contains("fitted_exponent")) exponent = r.at("fitted_exponent").dump();
        } catch (const std::exception&) {
            headline = "(result file unreadable)";
            ok = false;
        }
        const bool checks_passed = manifest.value("checks_passed", false);
        std::ostringstream row;
        row.setf(std::ios::left);
        row.width(18);
        row << experiment;
        os << row.str() << "| ";
        std::ostringstream h;
        h.setf(std::ios::left);
        h.width(43);
        h << headline.substr(0, 43);
        os << h.str() << "| ";
        std::ostringstream ex;
        ex.setf(std::ios::left);
        ex.width(16);
        ex << (exponent.empty() ? "-" : exponent);
        os << ex.str() << "| " << (checks_passed ? "pass" : "FAIL") << "\n";
        csv.row({dir, experiment, headline, exponent.empty() ? "-" : exponent,
                 checks_passed ? "pass" : "FAIL"});
    }
    if (csv_out) *csv_out = csv.str();
    return ok;
}

}  // namespace rwre
