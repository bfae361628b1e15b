#ifndef NNWAVE_REPORTS_HPP
#define NNWAVE_REPORTS_HPP

#include <map>
#include <set>
#include <string>
#include <vector>

#include "nnwave/hazard.hpp"
#include "nnwave/trainer.hpp"

namespace nnwave {

// Hazard-curve files: one row per (point, aep), points ascending, the AEP
// grid in its canonical (decreasing) order within each point.
std::string format_hazard_csv(const std::vector<HazardCurve>& curves);
std::vector<HazardCurve> parse_hazard_csv(const std::string& text, const AepGrid& grid);

// Per-point curves for one landscape from simulated peaks (the reference).
// Points are independent, so jobs > 1 fans out without changing any value;
// results always come back in ascending point order.
std::vector<HazardCurve> curves_from_table(const SimulationTable& table, const LandscapeKey& ls,
                                           const std::set<int>& storm_ids,
                                           const StormRates& rates, const AepGrid& grid,
                                           int jobs = 1);

// Per-point curves from one cell's predicted peaks.
std::vector<HazardCurve> curves_from_predictions(const PredictionSet& preds,
                                                 const StormRates& rates, const AepGrid& grid,
                                                 int jobs = 1);

struct ReportInputs {
    const SimulationTable* table = nullptr;
    std::vector<PredictionSet> predictions;  // every completed cell
    // reference curves per landscape; prediction curves per cell key
    std::map<LandscapeKey, std::vector<HazardCurve>> reference_curves;
    std::map<std::string, std::vector<HazardCurve>> prediction_curves;
    AepGrid grid;
    double alpha = 0.05;
    std::string nrmse_normalizer = "mean";  // "mean" or "range"
};

struct ReportBundle {
    std::string table1_csv;  // per-landscape RMSE/correlation (paper Table 1 analogue)
    std::string table2_csv;  // K-S rejection percentages (Table 2 analogue)
    std::string fig1_csv;    // per-point RMSE exceedance series (Fig. 1 analogue)
    std::string fig2_csv;    // per-point RMSE difference vs the M1 baseline (Fig. 2 data)
    std::string fig34_csv;   // per-AEP RMSE / NRMSE (Figs. 3-4 analogue)
    std::string metrics_json;  // full-precision machine-readable metrics
};

ReportBundle build_reports(const ReportInputs& inputs);

}  // namespace nnwave

#endif
