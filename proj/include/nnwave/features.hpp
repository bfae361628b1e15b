#ifndef NNWAVE_FEATURES_HPP
#define NNWAVE_FEATURES_HPP

#include <Eigen/Dense>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "nnwave/catalog.hpp"
#include "nnwave/oracle.hpp"

namespace nnwave {

enum class Variant { M1, M2, M3, M4 };

std::string variant_name(Variant v);
Variant variant_from_name(const std::string& name);

// Frozen feature contract per model variant. M1/M4 see the 13 storm +
// landscape + boundary features; M2/M3 append a surge feature (predicted by
// a surge surrogate for M2, simulated for M3). M4 predicts (surge, hs), the
// others predict hs alone.
struct FeatureSchema {
    Variant variant = Variant::M1;
    std::vector<std::string> feature_names;
    int input_dim = 0;
    int output_dim = 0;

    bool operator==(const FeatureSchema&) const = default;
};

FeatureSchema make_schema(Variant v);

// Identifies one dataset row across the study. Field order gives the
// canonical row ordering: landscape, then storm, then point.
struct RowKey {
    LandscapeKey landscape;
    int storm_id = 0;
    int point_id = 0;
    auto operator<=>(const RowKey&) const = default;
};

struct Dataset {
    Eigen::MatrixXd inputs;   // rows x input_dim
    Eigen::MatrixXd targets;  // rows x output_dim (0 columns if unavailable)
    std::vector<RowKey> keys;
    FeatureSchema schema;

    Eigen::Index rows() const { return inputs.rows(); }
};

// Source of the surge feature for M2/M3 rows.
struct SurgeSource {
    enum class Kind { none, simulated, predicted };
    Kind kind = Kind::none;
    // Lookup for predicted surge, meters. Required iff kind == predicted.
    std::function<double(const RowKey&)> predicted;

    static SurgeSource none() { return {Kind::none, nullptr}; }
    static SurgeSource simulated() { return {Kind::simulated, nullptr}; }
    static SurgeSource from_prediction(std::function<double(const RowKey&)> f) {
        return {Kind::predicted, std::move(f)};
    }
};

// One row per simulation record, sorted by (landscape, storm_id, point_id);
// feature order exactly per schema; targets hs (M1-M3) or (surge, hs) (M4).
Dataset assemble(const SimulationTable& table, const Catalog& catalog,
                 const std::vector<Landscape>& landscapes, const FeatureSchema& schema,
                 const SurgeSource& surge_source);

// Key-driven assembly used at prediction time: builds features for the given
// rows; targets are taken from `table` when provided, otherwise left empty.
// M3 requires `table` (its surge feature is the simulated value).
Dataset assemble_rows(const std::vector<RowKey>& keys, const Catalog& catalog,
                      const std::vector<Landscape>& landscapes, const FeatureSchema& schema,
                      const SurgeSource& surge_source, const SimulationTable* table);

// Per-column z-score transform, fitted on training rows only. Population
// standard deviation; columns with std below 1e-12 are left centered only.
struct Scaler {
    Eigen::VectorXd input_mean, input_std;
    Eigen::VectorXd target_mean, target_std;
    bool fitted = false;

    bool operator==(const Scaler&) const;
};

Scaler fit_scaler(const Dataset& train);
Dataset apply(const Scaler& scaler, const Dataset& ds);
// Back to physical units (meters).
Eigen::MatrixXd invert_targets(const Scaler& scaler, const Eigen::MatrixXd& preds);

// Debug export: key columns, named feature columns, target columns.
std::string format_dataset_csv(const Dataset& ds);

}  // namespace nnwave

#endif
