#ifndef NNWAVE_CATALOG_HPP
#define NNWAVE_CATALOG_HPP

#include <Eigen/Dense>
#include <set>
#include <string>
#include <vector>

#include "nnwave/errors.hpp"

namespace nnwave {

// One synthetic tropical cyclone, parameterized at landfall.
struct StormRecord {
    int storm_id = 0;
    double heading = 0;       // degrees, (-180, 180]
    double v_f = 0;           // forward velocity, knots
    double r_max = 0;         // radius of maximum winds, nautical miles
    double landfall_lon = 0;  // degrees east (negative west)
    double c_p = 0;           // central pressure, mbar
    bool is_core = false;     // member of the subset simulated on every future landscape
};

struct Catalog {
    std::vector<StormRecord> storms;

    int core_count() const {
        int n = 0;
        for (const auto& s : storms) n += s.is_core ? 1 : 0;
        return n;
    }
    const StormRecord& by_id(int storm_id) const;
};

// One location of the study grid with its landscape morphology attributes.
struct GridPoint {
    int point_id = 0;
    double lon = 0, lat = 0;  // degrees
    double elevation = 0;     // meters relative to datum (negative = below datum)
    double avg_slope = 0;     // dimensionless rise/run
    double manning_n = 0;     // bottom roughness coefficient
    double z0 = 0;            // free-surface roughness length, meters
    double canopy = 0;        // wind-reduction coefficient in [0, 1]
};

struct LandscapeKey {
    std::string scenario;
    int year = 0;
    auto operator<=>(const LandscapeKey&) const = default;
    std::string label() const { return scenario + "_" + std::to_string(year); }
};

// A decadal scenario snapshot: one mean sea level plus per-point morphology.
struct Landscape {
    std::string scenario;
    int year = 0;
    double msl = 0;  // mean sea level, meters
    std::vector<GridPoint> points;  // sorted ascending by point_id

    LandscapeKey key() const { return {scenario, year}; }
    const GridPoint& by_id(int point_id) const;
};

// Parses a delimited storm table (header storm_id,heading_deg,vf_kt,rmax_nmi,
// landfall_lon_deg,cp_mbar; comma or tab separated, autodetected) and flags
// the core subset. Throws ParseError / ValidationError.
Catalog parse_storm_catalog(const std::string& text, const std::set<int>& core_ids);

// Parses a landscape point table (header point_id,lon_deg,lat_deg,elev_m,
// avg_slope,manning_n,z0_m,canopy); points are sorted ascending by point_id.
Landscape parse_landscape(const std::string& points_text, const std::string& scenario,
                          int year, double msl);

// Serialization mirrors of the parsers (round-trip exact via shortest
// round-trip double formatting).
std::string format_storm_catalog(const Catalog& catalog);
std::string format_landscape_points(const Landscape& ls);

// Mean over the up-to-8 neighbors of |delta elevation| / center distance;
// diagonal neighbors are cell_size*sqrt(2) away. Border cells average over
// the neighbors that exist. Requires a raster of at least 2x2.
Eigen::MatrixXd compute_avg_slope(const Eigen::MatrixXd& elevations, double cell_size);

}  // namespace nnwave

#endif
