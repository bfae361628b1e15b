#ifndef NNWAVE_GEN_HPP
#define NNWAVE_GEN_HPP

#include <set>
#include <string>
#include <vector>

#include "nnwave/catalog.hpp"

namespace nnwave {

// Desk-scale synthetic study generator: one baseline landscape plus ten
// future snapshots (Lower/Higher scenarios, 2030-2070) on a shared square
// grid, with smoothly varying analytic morphology fields, scenario-dependent
// subsidence, and mean sea level that accelerates in the Higher scenario so
// its final year is the hardest extrapolation fold.
struct GenConfig {
    int points = 576;       // perfect square >= 4
    int storms = 645;       // evenly spaced subset of the bundled table when smaller
    int core_storms = 90;   // capped at the storm count
    std::string catalog_csv;  // bundled storm table text (already read)
};

// Deterministic core-subset rule: favors intense storms making landfall near
// the study grid (score = pressure deficit times an exponential distance
// decay), which is how a rate-weighted reduced storm set for a local domain
// behaves. Ties break on storm id.
std::set<int> select_core_storms(const Catalog& catalog, int count,
                                 double lon_center = -90.5);

std::vector<std::string> scenario_names();  // {"Lower", "Higher"}
std::vector<int> study_years();             // {2030, ..., 2070}

// Mean sea level in meters for a scenario/year ("Baseline" pins 0).
double scenario_msl(const std::string& scenario, int year);

// Builds all 11 landscapes of the study in deterministic order
// (baseline first, then by (scenario, year)).
std::vector<Landscape> generate_landscapes(int points);

// Writes storms.csv, core_storms.txt and per-landscape CSV/JSON pairs into
// out_dir. Refuses a non-empty directory unless force is set.
struct GenResult {
    int landscapes = 0;
    int storms = 0;
    int core = 0;
    int points = 0;
};
GenResult generate_study(const GenConfig& config, const std::string& out_dir, bool force);

// Loads the study inputs back (used by the downstream commands).
struct StudyInputs {
    Catalog catalog;
    std::vector<Landscape> landscapes;
};
StudyInputs load_study_inputs(const std::string& dir);

}  // namespace nnwave

#endif
