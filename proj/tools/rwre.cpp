// Batch experiment runner: parses a JSON experiment config, dispatches to
// the estimators, and persists JSON/CSV results plus a run manifest.
//
//   rwre <experiment> --config cfg.json [--seed N] [--out dir]
//   rwre report dir [dir...]
//
// Exit codes: 0 all checks passed, 1 some configured check failed,
// 2 usage or config error.

#include <exception>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "rwre/harness.hpp"

int main(int argc, char** argv) {
    CLI::App app{"rwre: ballistic random walk in random environment lab"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_dir;
    std::uint64_t seed_override = 0;
    bool seed_given = false;

    std::vector<CLI::App*> experiment_cmds;
    for (const auto& name : rwre::experiment_names()) {
        CLI::App* cmd = app.add_subcommand(name, "run the " + name + " experiment");
        cmd->add_option("--config", config_path, "experiment config JSON")->required();
        cmd->add_option("--out", out_dir, "output directory (overrides config)");
        cmd->add_option_function<std::uint64_t>(
               "--seed",
               [&seed_override, &seed_given](std::uint64_t s) {
                   seed_override = s;
                   seed_given = true;
               },
               "master seed (overrides config)");
        experiment_cmds.push_back(cmd);
    }

    std::vector<std::string> report_dirs;
    std::string report_csv;
    CLI::App* report_cmd = app.add_subcommand("report", "summarize run manifests");
    report_cmd->add_option("dirs", report_dirs, "run directories");
    report_cmd->add_option("--csv", report_csv, "also write the summary as CSV to this path");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    try {
        if (report_cmd->parsed()) {
            std::string csv;
            const bool ok = rwre::report(report_dirs, std::cout, report_csv.empty() ? nullptr : &csv);
            if (!report_csv.empty()) rwre::write_file(report_csv, csv);
            return ok ? 0 : 2;
        }

        for (std::size_t i = 0; i < experiment_cmds.size(); ++i) {
            if (!experiment_cmds[i]->parsed()) continue;
            const std::string& name = rwre::experiment_names()[i];
            rwre::ExperimentConfig cfg = rwre::load_config(config_path);
            if (cfg.experiment.empty()) {
                cfg.experiment = name;
                cfg.canonical["experiment"] = name;
            } else if (cfg.experiment != name) {
                throw rwre::ConfigError("config experiment '" + cfg.experiment +
                                        "' does not match subcommand '" + name + "'");
            }
            if (seed_given) {
                cfg.master_seed = seed_override;
                cfg.canonical["master_seed"] = seed_override;
            }
            if (!out_dir.empty()) cfg.output_dir = out_dir;

            const rwre::RunManifest manifest = rwre::run(cfg);
            std::cout << "experiment: " << manifest.experiment << "\n"
                      << "output dir: " << manifest.output_dir.string() << "\n"
                      << "config hash: " << manifest.config_hash << "\n"
                      << "checks: " << (manifest.checks_passed ? "pass" : "FAIL") << "\n";
            return manifest.checks_passed ? 0 : 1;
        }
        return 2;
    } catch (const rwre::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
