#ifndef NNWAVE_STUDY_HPP
#define NNWAVE_STUDY_HPP

#include <string>
#include <vector>

#include "nnwave/gen.hpp"
#include "nnwave/hazard.hpp"
#include "nnwave/reports.hpp"
#include "nnwave/trainer.hpp"

namespace nnwave {

// Full study configuration; every field has a visible default
// (`nnwave gen --print-config`) and can be overridden from a JSON config
// file or --set key=value flags.
struct StudyConfig {
    std::string out_dir;  // empty: $NNWAVE_OUTPUT_ROOT or "./study"

    // gen
    int points = 576;
    int storms = 645;
    int core_storms = 90;
    std::string catalog_file;  // empty: the bundled table

    OracleParams oracle;

    // training (desk-scale defaults; the library defaults in TrainConfig are
    // a full pass per epoch with a 100-epoch cap)
    TrainConfig train = desk_train_defaults();
    std::vector<std::string> variants = {"M1", "M2", "M3", "M4"};
    std::vector<std::uint64_t> seeds = {7, 8, 9};

    // hazard
    double alpha = 0.05;
    double total_rate = 0.35;
    std::string rates_source = "synthetic";  // "synthetic" or "file"
    std::string rates_file;
    std::string nrmse_normalizer = "mean";  // or "range"
    std::vector<double> aep_grid;           // empty: the standard 23-value grid

    int jobs = 0;  // 0 = hardware concurrency

    static TrainConfig desk_train_defaults();
    std::string resolved_out_dir() const;
    AepGrid grid() const;
    int resolved_jobs() const;
    std::vector<Variant> variant_list() const;
};

// Defaults -> optional config file -> --set overrides; throws ConfigError on
// unknown keys or malformed values.
StudyConfig load_config(const std::string& config_path,
                        const std::vector<std::string>& overrides);
std::string config_to_json(const StudyConfig& config);

// Subcommand implementations. Each throws on failure and prints a one-line
// machine-parsable summary on success.
void cmd_gen(const StudyConfig& config, bool force);
void cmd_simulate(const StudyConfig& config, bool force);
void cmd_train(const StudyConfig& config, bool force);
void cmd_predict(const StudyConfig& config, const std::string& model_path,
                 const std::string& scenario, int year, const std::string& out_path,
                 const std::string& dump_features_path = "");
void cmd_hazard(const StudyConfig& config, bool force);
void cmd_report(const StudyConfig& config);

// Shared helpers for commands and tests.
SimulationTable load_sims(const std::string& dir, const std::vector<Landscape>& landscapes);
StormRates study_rates(const StudyConfig& config, const Catalog& catalog);
std::string sims_filename(const LandscapeKey& ls);
std::string hazard_filename(const std::string& source, const LandscapeKey& ls);

}  // namespace nnwave

#endif
