#ifndef NNWAVE_TRAINER_HPP
#define NNWAVE_TRAINER_HPP

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "nnwave/features.hpp"
#include "nnwave/net_io.hpp"
#include "nnwave/oracle.hpp"

namespace nnwave {

// One leave-one-landscape-out fold: the held-out future landscape supplies
// the test rows (core storms only); training covers the remaining future
// landscapes plus the baseline (full catalog there).
struct Fold {
    LandscapeKey held_out;
    std::vector<LandscapeKey> train_landscapes;
    std::vector<RowKey> train_rows;
    std::vector<RowKey> test_rows;
};

std::vector<Fold> make_folds(const std::vector<Landscape>& landscapes, const Catalog& catalog,
                             const std::string& baseline_scenario = "Baseline");

struct TrainConfig {
    std::string profile = "small";
    int batch_size = 256;
    int max_epochs = 100;
    int steps_per_epoch = 0;  // 0 = one full pass per epoch
    int early_stop_patience = 10;
    double lr_initial = 0.01;
    double lr_factor = 0.75;
    double lr_floor = 1e-5;
    int lr_patience = 2;
    int val_modulus = 10;  // row joins the validation split iff key hash % 10 == 0
    int val_row_cap = 0;   // 0 = evaluate on every validation row
};

// Per-fold assembly shared by all variants and seeds: the 13 base features,
// both targets, and the simulated surge as a separate column.
struct FoldData {
    Fold fold;
    Dataset train;                    // 13 features, targets (surge, hs)
    Eigen::VectorXd train_surge;      // simulated surge per training row
    Dataset test;                     // 13 features, no targets
};

FoldData make_fold_data(const Fold& fold, const SimulationTable& table, const Catalog& catalog,
                        const std::vector<Landscape>& landscapes);

struct PredictionSet {
    Variant variant = Variant::M1;
    LandscapeKey landscape;
    std::uint64_t seed = 0;
    std::vector<RowKey> keys;
    Eigen::VectorXd hs;     // meters
    Eigen::VectorXd surge;  // meters; only for M4 (empty otherwise)
};

struct TrainResult {
    ModelDocument model;
    PredictionSet predictions;
};

// Trains one variant on one fold. M2 first trains a surge surrogate on the
// fold's training rows, then feeds its predictions to every row's surge
// feature; M3 takes the simulated surge for both train and test rows (the
// table must cover the held-out landscape in that case). Throws
// TrainingDivergedError on a non-finite loss.
TrainResult train_variant(Variant variant, const FoldData& data, const SimulationTable& table,
                          const TrainConfig& config, std::uint64_t seed);

// Batched eval-mode inference in physical units.
Eigen::MatrixXd predict_with_model(const ModelDocument& doc, const Eigen::MatrixXd& inputs_meters);

// Deterministic per-cell seed: base_seed ^ hash(variant, fold).
std::uint64_t cell_seed(std::uint64_t base_seed, Variant variant, const LandscapeKey& fold_key);

// Membership test for the deterministic key-hash validation split.
bool is_validation_row(const RowKey& key, std::uint64_t seed, int modulus);

struct CellOutcome {
    std::string status;  // "ok", "diverged", "cached"
    int epochs = 0;
    double final_train_loss = 0;
    double final_val_loss = 0;
    std::vector<double> lr_trace;
    std::string surge_model_id;  // M2 only
    int diverged_epoch = -1;
    double diverged_lr = 0;
};

struct StudySummary {
    // cell key "variant/scenario/year/seed" -> outcome
    std::map<std::string, CellOutcome> cells;
};

std::string cell_key(Variant v, const LandscapeKey& ls, std::uint64_t seed);

// Runs every (fold x variant x seed) cell, writing per-cell predictions and
// model documents under out_dir and a deterministic study_summary.json.
// Existing cells are skipped unless force is set; a diverged cell is
// recorded and does not abort the study. jobs > 1 parallelizes across cells
// without changing any output byte.
StudySummary run_study(const std::vector<Landscape>& landscapes, const Catalog& catalog,
                       const SimulationTable& table, const std::vector<Variant>& variants,
                       const TrainConfig& config, const std::vector<std::uint64_t>& seeds,
                       const std::string& out_dir, int jobs, bool force);

std::string predictions_filename(Variant v, const LandscapeKey& ls, std::uint64_t seed);
std::string model_filename(Variant v, const LandscapeKey& ls, std::uint64_t seed);

PredictionSet load_predictions_file(const std::string& path, Variant v, const LandscapeKey& ls,
                                    std::uint64_t seed);

}  // namespace nnwave

#endif
