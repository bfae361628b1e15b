#include "nnwave/oracle.hpp"

#include <algorithm>
#include <cmath>

namespace nnwave {

namespace {

constexpr double kDegKm = 111.0;            // km per degree latitude
constexpr double kNmiKm = 1.852;            // km per nautical mile
constexpr double kDegRad = M_PI / 180.0;

double clamp01(double v) { return std::clamp(v, 0.0, 1.0); }

std::uint64_t pack_key(int storm_id, int point_id) {
    return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(storm_id)) << 32) |
           static_cast<std::uint32_t>(point_id);
}

struct StormGeometry {
    double dp;      // pressure deficit, mbar
    double r_km;    // radius of maximum winds, km
    double d;       // distance point-to-landfall, km
    double asym;    // left/right asymmetry factor
};

StormGeometry geometry(const StormRecord& storm, const GridPoint& pt, const OracleParams& p) {
    StormGeometry g;
    g.dp = p.p_far - storm.c_p;
    g.r_km = kNmiKm * storm.r_max;
    const double coslat = std::cos(p.landfall_lat * kDegRad);
    const double dx = (pt.lon - storm.landfall_lon) * coslat;
    const double dy = pt.lat - p.landfall_lat;
    g.d = kDegKm * std::sqrt(dx * dx + dy * dy);
    const double rel = kDegKm * (pt.lon - storm.landfall_lon) * coslat;
    g.asym = 1.0 + p.asym_amp * std::tanh(rel / (2.0 * g.r_km)) *
                       std::cos(storm.heading * kDegRad);
    return g;
}

}  // namespace

void OracleParams::validate() const {
    const double all[] = {p_far, k_v, k_s, gamma, landfall_lat, asym_amp, vf_gain,
                          surge_dist_base, surge_dist_rmax, shoal_amp, shoal_scale,
                          friction_gain, wave_energy, wave_dist_base, wave_dist_rmax,
                          z0_gain, canopy_gain, slope_amp, slope_scale};
    for (double v : all)
        if (!(v > 0) || !std::isfinite(v))
            throw ValidationError("oracle constants must all be strictly positive and finite");
    if (!(gamma > 0 && gamma <= 1))
        throw ValidationError("gamma must lie in (0, 1]");
}

double oracle_surge(const StormRecord& storm, const Landscape& ls, const GridPoint& pt,
                    const OracleParams& params) {
    const StormGeometry g = geometry(storm, pt, params);
    const double depth = ls.msl - pt.elevation;  // still-water depth, positive = submerged
    const double setup = params.k_s * g.dp * (1.0 + params.vf_gain * storm.v_f) *
                         std::exp(-g.d / (params.surge_dist_base + params.surge_dist_rmax * g.r_km)) *
                         (1.0 + params.shoal_amp * std::exp(-std::max(depth, 0.0) / params.shoal_scale)) *
                         std::exp(-params.friction_gain * pt.manning_n * clamp01((2.0 - depth) / 2.0)) *
                         g.asym;
    return ls.msl + std::max(setup, 0.0);
}

double oracle_wave(const StormRecord& storm, const Landscape& ls, const GridPoint& pt,
                   const OracleParams& params, double eta) {
    const double h = std::max(0.0, eta - pt.elevation);  // inundation depth
    if (h == 0.0) return 0.0;
    const StormGeometry g = geometry(storm, pt, params);
    const double wind = params.k_v * std::sqrt(std::max(g.dp, 0.0));
    const double hs0 = params.wave_energy * wind * wind *
                       std::exp(-g.d / (params.wave_dist_base + params.wave_dist_rmax * g.r_km)) *
                       std::exp(-params.z0_gain * pt.z0) *
                       (1.0 - params.canopy_gain * pt.canopy) *
                       (1.0 + params.slope_amp * clamp01(params.slope_scale * pt.avg_slope)) *
                       g.asym;
    return std::min(hs0, params.gamma * h);
}

void SimulationTable::insert(const LandscapeKey& ls, const SimulationRecord& rec) {
    auto& per = by_landscape_[ls];
    auto key = pack_key(rec.storm_id, rec.point_id);
    if (per.index.count(key))
        throw ValidationError("duplicate simulation record for storm " +
                              std::to_string(rec.storm_id) + ", point " +
                              std::to_string(rec.point_id) + " on " + ls.label());
    per.index.emplace(key, per.rows.size());
    per.rows.push_back(rec);
}

bool SimulationTable::contains(const LandscapeKey& ls, int storm_id, int point_id) const {
    auto it = by_landscape_.find(ls);
    return it != by_landscape_.end() && it->second.index.count(pack_key(storm_id, point_id));
}

const SimulationRecord& SimulationTable::at(const LandscapeKey& ls, int storm_id,
                                            int point_id) const {
    auto it = by_landscape_.find(ls);
    if (it != by_landscape_.end()) {
        auto jt = it->second.index.find(pack_key(storm_id, point_id));
        if (jt != it->second.index.end()) return it->second.rows[jt->second];
    }
    throw ValidationError("no simulation record for storm " + std::to_string(storm_id) +
                          ", point " + std::to_string(point_id) + " on " + ls.label());
}

const std::vector<SimulationRecord>& SimulationTable::records(const LandscapeKey& ls) const {
    auto it = by_landscape_.find(ls);
    if (it == by_landscape_.end())
        throw ValidationError("no simulation records for landscape " + ls.label());
    return it->second.rows;
}

std::vector<LandscapeKey> SimulationTable::landscape_keys() const {
    std::vector<LandscapeKey> keys;
    for (const auto& [k, v] : by_landscape_) keys.push_back(k);
    return keys;
}

std::size_t SimulationTable::size() const {
    std::size_t n = 0;
    for (const auto& [k, v] : by_landscape_) n += v.rows.size();
    return n;
}

void SimulationTable::remove_landscape(const LandscapeKey& ls) { by_landscape_.erase(ls); }

SubsetRule default_subset_rule(const Catalog& catalog, const std::string& baseline_scenario) {
    std::set<int> all, core;
    for (const auto& s : catalog.storms) {
        all.insert(s.storm_id);
        if (s.is_core) core.insert(s.storm_id);
    }
    return [all, core, baseline_scenario](const Landscape& ls) {
        return ls.scenario == baseline_scenario ? all : core;
    };
}

SimulationTable generate_simulations(const Catalog& catalog,
                                     const std::vector<Landscape>& landscapes,
                                     const OracleParams& params, const SubsetRule& subset_rule) {
    params.validate();
    SimulationTable table;
    for (const auto& ls : landscapes) {
        const std::set<int> subset = subset_rule(ls);
        if (subset.empty())
            throw ConfigError("empty storm subset for landscape " + ls.key().label());
        for (int storm_id : subset) {
            const StormRecord& storm = catalog.by_id(storm_id);
            for (const auto& pt : ls.points) {
                SimulationRecord rec;
                rec.storm_id = storm_id;
                rec.point_id = pt.point_id;
                rec.surge = oracle_surge(storm, ls, pt, params);
                rec.hs = oracle_wave(storm, ls, pt, params, rec.surge);
                table.insert(ls.key(), rec);
            }
        }
    }
    return table;
}

}  // namespace nnwave
