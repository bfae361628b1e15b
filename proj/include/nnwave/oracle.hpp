#ifndef NNWAVE_ORACLE_HPP
#define NNWAVE_ORACLE_HPP

#include <cstdint>
#include <functional>
#include <map>
#include <set>
#include <unordered_map>
#include <vector>

#include "nnwave/catalog.hpp"

namespace nnwave {

// Deterministic parametric stand-in for the coupled circulation+wave solver.
// All constants are named defaults here so the pseudo-physics is documented
// and reproducible; nothing is hidden in the implementation.
struct OracleParams {
    double p_far = 1013.25;      // far-field pressure, mbar
    double k_v = 3.0;            // wind coefficient, (m/s)/sqrt(mbar)
    double k_s = 0.012;          // surge coefficient, m/mbar
    double gamma = 0.78;         // depth-limited breaking ratio
    double landfall_lat = 29.5;  // study-wide landfall latitude, degrees

    // Shape constants of the surge response.
    double asym_amp = 0.25;        // left/right storm asymmetry amplitude
    double vf_gain = 0.015;        // forward-velocity gain, 1/knot
    double surge_dist_base = 25.0; // decay length offset, km
    double surge_dist_rmax = 3.0;  // decay length per km of r_max
    double shoal_amp = 0.6;        // shallow-water amplification amplitude
    double shoal_scale = 8.0;      // depth scale of the amplification, m
    double friction_gain = 8.0;    // Manning-n attenuation exponent gain
    // Shape constants of the wave response.
    double wave_energy = 0.0025;   // Hs per (m/s)^2 of wind
    double wave_dist_base = 40.0;  // decay length offset, km
    double wave_dist_rmax = 3.0;   // decay length per km of r_max
    double z0_gain = 2.0;          // surface-roughness attenuation, 1/m
    double canopy_gain = 0.5;      // canopy attenuation fraction
    double slope_amp = 0.3;        // slope-induced shoaling amplitude
    double slope_scale = 50.0;     // slope normalization (1 at slope 0.02)

    void validate() const;  // all strictly positive, gamma in (0, 1]
};

// Peak values for one (storm, landscape, point) triple.
struct SimulationRecord {
    int storm_id = 0;
    int point_id = 0;
    double surge = 0;  // peak water-surface elevation eta, meters
    double hs = 0;     // peak significant wave height, meters
};

// Indexed record store; at most one record per (storm, landscape, point).
class SimulationTable {
public:
    void insert(const LandscapeKey& ls, const SimulationRecord& rec);
    bool contains(const LandscapeKey& ls, int storm_id, int point_id) const;
    const SimulationRecord& at(const LandscapeKey& ls, int storm_id, int point_id) const;
    // Records of one landscape in insertion order; generate_simulations and
    // the CSV loader both insert sorted by (storm_id, point_id).
    const std::vector<SimulationRecord>& records(const LandscapeKey& ls) const;
    std::vector<LandscapeKey> landscape_keys() const;  // sorted
    std::size_t size() const;
    void remove_landscape(const LandscapeKey& ls);

private:
    struct PerLandscape {
        std::vector<SimulationRecord> rows;
        std::unordered_map<std::uint64_t, std::size_t> index;
    };
    std::map<LandscapeKey, PerLandscape> by_landscape_;
};

// Peak surge elevation (meters): pressure-deficit setup decayed with distance
// to landfall, amplified in shallow water, attenuated by bottom friction, and
// skewed by the heading-dependent left/right asymmetry. Total function.
double oracle_surge(const StormRecord& storm, const Landscape& ls, const GridPoint& pt,
                    const OracleParams& params);

// Peak significant wave height (meters): wind-sea growth decayed with
// distance, attenuated by surface roughness and canopy, amplified over
// sloping terrain, and capped at gamma times the local inundation depth.
double oracle_wave(const StormRecord& storm, const Landscape& ls, const GridPoint& pt,
                   const OracleParams& params, double eta);

// Which storms run on a given landscape.
using SubsetRule = std::function<std::set<int>(const Landscape&)>;

// Full catalog on the baseline landscape, core subset on future landscapes.
SubsetRule default_subset_rule(const Catalog& catalog, const std::string& baseline_scenario);

// One record per (storm in subset_rule(ls), ls, point). Deterministic and
// independent of iteration order. Throws ConfigError on an empty subset.
SimulationTable generate_simulations(const Catalog& catalog,
                                     const std::vector<Landscape>& landscapes,
                                     const OracleParams& params, const SubsetRule& subset_rule);

}  // namespace nnwave

#endif
