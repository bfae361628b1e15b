#include "nnwave/catalog.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

#include "nnwave/csv.hpp"

namespace nnwave {

namespace {

const std::vector<std::string> kStormHeader = {
    "storm_id", "heading_deg", "vf_kt", "rmax_nmi", "landfall_lon_deg", "cp_mbar"};
const std::vector<std::string> kLandscapeHeader = {
    "point_id", "lon_deg", "lat_deg", "elev_m", "avg_slope", "manning_n", "z0_m", "canopy"};

void check_header(const std::vector<std::string>& got, const std::vector<std::string>& want,
                  const char* what) {
    if (got != want) {
        std::string expect;
        for (size_t i = 0; i < want.size(); ++i) expect += (i ? "," : "") + want[i];
        throw ParseError(std::string(what) + ": header must be exactly '" + expect + "'");
    }
}

bool finite(double v) { return std::isfinite(v); }

}  // namespace

const StormRecord& Catalog::by_id(int storm_id) const {
    for (const auto& s : storms)
        if (s.storm_id == storm_id) return s;
    throw ValidationError("storm_id " + std::to_string(storm_id) + " not in catalog");
}

const GridPoint& Landscape::by_id(int point_id) const {
    auto it = std::lower_bound(points.begin(), points.end(), point_id,
                               [](const GridPoint& p, int id) { return p.point_id < id; });
    if (it == points.end() || it->point_id != point_id)
        throw ValidationError("point_id " + std::to_string(point_id) + " not in landscape");
    return *it;
}

Catalog parse_storm_catalog(const std::string& text, const std::set<int>& core_ids) {
    auto lines = csv::lines_of(text);
    if (lines.empty()) throw ParseError("storm catalog: empty input, header expected");
    char sep = csv::detect_sep(lines[0]);
    check_header(csv::split(lines[0], sep), kStormHeader, "storm catalog");

    Catalog cat;
    std::unordered_set<int> seen;
    for (size_t i = 1; i < lines.size(); ++i) {
        if (csv::trim(lines[i]).empty()) continue;
        auto tok = csv::split(lines[i], sep);
        int row = static_cast<int>(i) + 1;
        if (tok.size() != kStormHeader.size())
            throw ParseError("row " + std::to_string(row) + ": expected " +
                             std::to_string(kStormHeader.size()) + " fields, got " +
                             std::to_string(tok.size()));
        StormRecord s;
        s.storm_id = static_cast<int>(csv::parse_int(tok[0], row, "storm_id"));
        s.heading = csv::parse_double(tok[1], row, "heading_deg");
        s.v_f = csv::parse_double(tok[2], row, "vf_kt");
        s.r_max = csv::parse_double(tok[3], row, "rmax_nmi");
        s.landfall_lon = csv::parse_double(tok[4], row, "landfall_lon_deg");
        s.c_p = csv::parse_double(tok[5], row, "cp_mbar");

        if (s.storm_id <= 0)
            throw ValidationError("row " + std::to_string(row) + ": storm_id must be positive");
        if (!seen.insert(s.storm_id).second)
            throw ValidationError("duplicate storm_id " + std::to_string(s.storm_id));
        if (!(s.c_p > 800.0 && s.c_p < 1013.25))
            throw ValidationError("storm " + std::to_string(s.storm_id) +
                                  ": c_p must lie in (800, 1013.25), got " + tok[5]);
        if (!(s.v_f > 0))
            throw ValidationError("storm " + std::to_string(s.storm_id) + ": v_f must be > 0");
        if (!(s.r_max > 0))
            throw ValidationError("storm " + std::to_string(s.storm_id) + ": r_max must be > 0");
        if (!(s.heading > -180.0 && s.heading <= 180.0))
            throw ValidationError("storm " + std::to_string(s.storm_id) +
                                  ": heading must lie in (-180, 180]");
        s.is_core = core_ids.count(s.storm_id) > 0;
        cat.storms.push_back(s);
    }
    for (int id : core_ids)
        if (!seen.count(id))
            throw ValidationError("core storm id " + std::to_string(id) + " not found in catalog");
    return cat;
}

Landscape parse_landscape(const std::string& points_text, const std::string& scenario,
                          int year, double msl) {
    if (!finite(msl)) throw ValidationError("landscape " + scenario + ": msl must be finite");
    auto lines = csv::lines_of(points_text);
    if (lines.empty()) throw ParseError("landscape table: empty input, header expected");
    char sep = csv::detect_sep(lines[0]);
    check_header(csv::split(lines[0], sep), kLandscapeHeader, "landscape table");

    Landscape ls;
    ls.scenario = scenario;
    ls.year = year;
    ls.msl = msl;
    std::unordered_set<int> seen;
    for (size_t i = 1; i < lines.size(); ++i) {
        if (csv::trim(lines[i]).empty()) continue;
        auto tok = csv::split(lines[i], sep);
        int row = static_cast<int>(i) + 1;
        if (tok.size() != kLandscapeHeader.size())
            throw ParseError("row " + std::to_string(row) + ": expected " +
                             std::to_string(kLandscapeHeader.size()) + " fields, got " +
                             std::to_string(tok.size()));
        GridPoint p;
        p.point_id = static_cast<int>(csv::parse_int(tok[0], row, "point_id"));
        p.lon = csv::parse_double(tok[1], row, "lon_deg");
        p.lat = csv::parse_double(tok[2], row, "lat_deg");
        p.elevation = csv::parse_double(tok[3], row, "elev_m");
        p.avg_slope = csv::parse_double(tok[4], row, "avg_slope");
        p.manning_n = csv::parse_double(tok[5], row, "manning_n");
        p.z0 = csv::parse_double(tok[6], row, "z0_m");
        p.canopy = csv::parse_double(tok[7], row, "canopy");

        if (p.point_id <= 0)
            throw ValidationError("row " + std::to_string(row) + ": point_id must be positive");
        if (!seen.insert(p.point_id).second)
            throw ValidationError("duplicate point_id " + std::to_string(p.point_id));
        if (!(p.canopy >= 0.0 && p.canopy <= 1.0))
            throw ValidationError("point " + std::to_string(p.point_id) +
                                  ": canopy must lie in [0, 1], got " + tok[7]);
        if (p.manning_n < 0 || p.z0 < 0 || p.avg_slope < 0)
            throw ValidationError("point " + std::to_string(p.point_id) +
                                  ": manning_n, z0 and avg_slope must be >= 0");
        for (double v : {p.lon, p.lat, p.elevation})
            if (!finite(v))
                throw ValidationError("point " + std::to_string(p.point_id) +
                                      ": non-finite coordinate or elevation");
        ls.points.push_back(p);
    }
    std::sort(ls.points.begin(), ls.points.end(),
              [](const GridPoint& a, const GridPoint& b) { return a.point_id < b.point_id; });
    return ls;
}

std::string format_storm_catalog(const Catalog& catalog) {
    std::string out = "storm_id,heading_deg,vf_kt,rmax_nmi,landfall_lon_deg,cp_mbar\n";
    for (const auto& s : catalog.storms) {
        out += std::to_string(s.storm_id);
        for (double v : {s.heading, s.v_f, s.r_max, s.landfall_lon, s.c_p})
            out += "," + csv::format_double(v);
        out += "\n";
    }
    return out;
}

std::string format_landscape_points(const Landscape& ls) {
    std::string out = "point_id,lon_deg,lat_deg,elev_m,avg_slope,manning_n,z0_m,canopy\n";
    for (const auto& p : ls.points) {
        out += std::to_string(p.point_id);
        for (double v : {p.lon, p.lat, p.elevation, p.avg_slope, p.manning_n, p.z0, p.canopy})
            out += "," + csv::format_double(v);
        out += "\n";
    }
    return out;
}

Eigen::MatrixXd compute_avg_slope(const Eigen::MatrixXd& elevations, double cell_size) {
    const auto rows = elevations.rows(), cols = elevations.cols();
    if (rows < 2 || cols < 2)
        throw ValidationError("avg_slope raster must be at least 2x2, got " +
                              std::to_string(rows) + "x" + std::to_string(cols));
    if (!(cell_size > 0)) throw ValidationError("cell_size must be > 0");

    const double diag = cell_size * std::sqrt(2.0);
    Eigen::MatrixXd slope(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r) {
        for (Eigen::Index c = 0; c < cols; ++c) {
            double sum = 0;
            int n = 0;
            for (int dr = -1; dr <= 1; ++dr) {
                for (int dc = -1; dc <= 1; ++dc) {
                    if (dr == 0 && dc == 0) continue;
                    Eigen::Index rr = r + dr, cc = c + dc;
                    if (rr < 0 || rr >= rows || cc < 0 || cc >= cols) continue;
                    double dist = (dr != 0 && dc != 0) ? diag : cell_size;
                    sum += std::abs(elevations(rr, cc) - elevations(r, c)) / dist;
                    ++n;
                }
            }
            slope(r, c) = sum / n;
        }
    }
    return slope;
}

}  // namespace nnwave
