// Command-line front end for the desk-scale wave-surrogate study pipeline:
// gen -> simulate -> train -> (predict) -> hazard -> report.
#include <CLI11.hpp>
#include <cstdio>
#include <string>
#include <vector>

#include "nnwave/study.hpp"

namespace {

// Exit codes: 1 usage (CLI11), 2 validation/config, 3 numeric/divergence,
// 4 I/O.
int run_guarded(const std::function<void()>& fn) {
    try {
        fn();
        return 0;
    } catch (const nnwave::TrainingDivergedError& e) {
        std::fprintf(stderr, "error (diverged): %s\n", e.what());
        return 3;
    } catch (const nnwave::NumericError& e) {
        std::fprintf(stderr, "error (numeric): %s\n", e.what());
        return 3;
    } catch (const nnwave::IoError& e) {
        std::fprintf(stderr, "error (io): %s\n", e.what());
        return 4;
    } catch (const nnwave::Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"nnwave: neural wave-height surrogates on evolving landscapes"};
    app.require_subcommand(1);

    std::string config_path;
    std::vector<std::string> overrides;
    std::int64_t seed_flag = -1;
    int jobs_flag = -1;
    bool force = false;
    app.add_option("--config", config_path, "JSON config file");
    app.add_option("--set", overrides, "override a config key, e.g. --set train.max_epochs=20");
    app.add_option("--seed", seed_flag, "run a single seed (overrides the config seeds list)");
    app.add_option("--jobs", jobs_flag, "worker threads (--jobs 1 is bit-deterministic)");
    app.add_flag("--force", force, "overwrite existing outputs");

    auto* gen = app.add_subcommand("gen", "generate the synthetic study inputs");
    int points_flag = -1, storms_flag = -1, core_flag = -1;
    bool print_config = false;
    gen->add_option("--points", points_flag, "grid points (perfect square)");
    gen->add_option("--storms", storms_flag, "storm count (subset of the bundled table)");
    gen->add_option("--core-storms", core_flag, "core subset size");
    gen->add_flag("--print-config", print_config, "print the resolved config and exit");

    auto* simulate = app.add_subcommand("simulate", "run the closed-form oracle on the study");
    auto* train = app.add_subcommand("train", "train all variants with LOOCV");
    auto* predict = app.add_subcommand("predict", "predict one landscape with a saved model");
    std::string model_path, scenario, out_path, dump_features;
    int year = 0;
    predict->add_option("--model", model_path, "model document path")->required();
    predict->add_option("--scenario", scenario, "landscape scenario")->required();
    predict->add_option("--year", year, "landscape year")->required();
    predict->add_option("--out", out_path, "output CSV path");
    predict->add_option("--dump-features", dump_features,
                        "also write the assembled feature table (dataset.csv debug export)");
    auto* hazard = app.add_subcommand("hazard", "build hazard curves from sims and predictions");
    auto* report = app.add_subcommand("report", "aggregate metrics and report tables");

    // global flags may appear after the subcommand name
    for (auto* sub : {gen, simulate, train, predict, hazard, report}) sub->fallthrough();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;  // usage error
    }

    return run_guarded([&]() {
        nnwave::StudyConfig config = nnwave::load_config(config_path, overrides);
        if (seed_flag >= 0) config.seeds = {static_cast<std::uint64_t>(seed_flag)};
        if (jobs_flag >= 0) config.jobs = jobs_flag;
        if (points_flag > 0) config.points = points_flag;
        if (storms_flag > 0) config.storms = storms_flag;
        if (core_flag > 0) config.core_storms = core_flag;

        if (gen->parsed()) {
            if (print_config) {
                std::fputs(nnwave::config_to_json(config).c_str(), stdout);
                return;
            }
            nnwave::cmd_gen(config, force);
        } else if (simulate->parsed()) {
            nnwave::cmd_simulate(config, force);
        } else if (train->parsed()) {
            nnwave::cmd_train(config, force);
        } else if (predict->parsed()) {
            nnwave::cmd_predict(config, model_path, scenario, year, out_path, dump_features);
        } else if (hazard->parsed()) {
            nnwave::cmd_hazard(config, force);
        } else if (report->parsed()) {
            nnwave::cmd_report(config);
        }
    });
}
