#include "nnwave/gen.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <json.hpp>

#include "nnwave/csv.hpp"

namespace nnwave {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr double kLonMin = -91.1, kLonMax = -89.9;
constexpr double kLatMin = 29.1, kLatMax = 29.7;
constexpr double kPi = M_PI;

struct FieldPoint {
    double elevation, canopy, manning_n, z0;
};

double years_frac(int year) { return (year - 2020) / 50.0; }

double base_elevation(double xf, double yf) {
    return -8.0 + 10.0 * yf + 1.8 * std::sin(2.2 * kPi * xf + 0.7) * std::cos(1.7 * kPi * yf - 0.4) +
           0.9 * std::sin(4.7 * kPi * xf) * std::sin(3.1 * kPi * yf + 1.1);
}

double subsidence_50yr(double xf, double yf) {
    return 0.35 + 0.3 * (1.0 - yf) + 0.15 * std::sin(2.6 * kPi * xf + 0.5);
}

FieldPoint evaluate_fields(const std::string& scenario, int year, double xf, double yf) {
    const double t = years_frac(year);
    const bool higher = scenario == "Higher";
    FieldPoint f;
    f.elevation = base_elevation(xf, yf) - subsidence_50yr(xf, yf) * t * (higher ? 1.5 : 1.0);
    const double veg = 0.7 * std::exp(-std::pow((f.elevation - 0.7) / 0.9, 2)) *
                       (1.0 - 0.25 * t * (higher ? 1.4 : 1.0));
    f.canopy = std::clamp(veg, 0.0, 1.0);
    f.manning_n = 0.022 + 0.07 * f.canopy + 0.006 * (0.5 + 0.5 * std::sin(2.9 * kPi * xf - 1.2));
    f.z0 = 0.002 + 0.05 * f.canopy + 0.002 * (0.5 + 0.5 * std::cos(1.9 * kPi * xf + 0.3));
    return f;
}

int grid_side(int points) {
    const int side = static_cast<int>(std::lround(std::sqrt(static_cast<double>(points))));
    if (side < 2 || side * side != points)
        throw ValidationError("points must be a perfect square of at least 4, got " +
                              std::to_string(points));
    return side;
}

Landscape build_landscape(const std::string& scenario, int year, int points) {
    const int side = grid_side(points);
    const double dlon = (kLonMax - kLonMin) / (side - 1);
    const double dlat = (kLatMax - kLatMin) / (side - 1);

    Landscape ls;
    ls.scenario = scenario;
    ls.year = year;
    ls.msl = scenario_msl(scenario, year);

    Eigen::MatrixXd elev(side, side);
    for (int iy = 0; iy < side; ++iy) {
        for (int ix = 0; ix < side; ++ix) {
            const double xf = static_cast<double>(ix) / (side - 1);
            const double yf = static_cast<double>(iy) / (side - 1);
            elev(iy, ix) = evaluate_fields(scenario, year, xf, yf).elevation;
        }
    }
    const double cell_size = 111000.0 * dlat;  // meters per grid step in latitude
    Eigen::MatrixXd slope = compute_avg_slope(elev, cell_size);

    for (int iy = 0; iy < side; ++iy) {
        for (int ix = 0; ix < side; ++ix) {
            const double xf = static_cast<double>(ix) / (side - 1);
            const double yf = static_cast<double>(iy) / (side - 1);
            const FieldPoint f = evaluate_fields(scenario, year, xf, yf);
            GridPoint p;
            p.point_id = iy * side + ix + 1;
            p.lon = kLonMin + dlon * ix;
            p.lat = kLatMin + dlat * iy;
            p.elevation = f.elevation;
            p.avg_slope = slope(iy, ix);
            p.manning_n = f.manning_n;
            p.z0 = f.z0;
            p.canopy = f.canopy;
            ls.points.push_back(p);
        }
    }
    return ls;
}

}  // namespace

std::vector<std::string> scenario_names() { return {"Lower", "Higher"}; }

std::vector<int> study_years() { return {2030, 2040, 2050, 2060, 2070}; }

double scenario_msl(const std::string& scenario, int year) {
    const double t = years_frac(year);
    if (scenario == "Baseline") return 0.0;
    if (scenario == "Lower") return 0.7 * t;
    // superlinear rise: the final Higher year jumps far beyond every other
    // landscape (1.6 m vs at most 0.7 m), making it the extrapolation fold
    if (scenario == "Higher") return 0.3 * t + 1.3 * t * t * t;
    throw ValidationError("unknown scenario '" + scenario + "'");
}

std::set<int> select_core_storms(const Catalog& catalog, int count, double lon_center) {
    if (count <= 0 || count > static_cast<int>(catalog.storms.size()))
        throw ValidationError("core storm count must lie in [1, catalog size]");
    std::vector<std::pair<double, int>> scored;
    const double coslat = std::cos(29.5 * M_PI / 180.0);
    for (const auto& s : catalog.storms) {
        const double dp = 1013.25 - s.c_p;
        const double dist_km = std::abs(s.landfall_lon - lon_center) * 111.0 * coslat;
        scored.emplace_back(dp * std::exp(-dist_km / 200.0), s.storm_id);
    }
    std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return a.second < b.second;
    });
    std::set<int> core;
    for (int i = 0; i < count; ++i) core.insert(scored[i].second);
    return core;
}

std::vector<Landscape> generate_landscapes(int points) {
    std::vector<Landscape> out;
    out.push_back(build_landscape("Baseline", 2020, points));
    std::vector<std::pair<std::string, int>> keys;
    for (const auto& s : scenario_names())
        for (int y : study_years()) keys.emplace_back(s, y);
    std::sort(keys.begin(), keys.end());
    for (const auto& [s, y] : keys) out.push_back(build_landscape(s, y, points));
    return out;
}

GenResult generate_study(const GenConfig& config, const std::string& out_dir, bool force) {
    const fs::path dir(out_dir);
    if (fs::exists(dir) && !fs::is_directory(dir))
        throw IoError(out_dir + " exists and is not a directory");
    if (fs::exists(dir) && !fs::is_empty(dir) && !force)
        throw IoError("output directory " + out_dir + " is not empty (use --force to overwrite)");
    fs::create_directories(dir);

    // Storm table: the bundled catalog, thinned evenly when fewer storms are
    // requested.
    Catalog full = parse_storm_catalog(config.catalog_csv, {});
    if (config.storms < 1 || config.storms > static_cast<int>(full.storms.size()))
        throw ValidationError("storms must lie in [1, " + std::to_string(full.storms.size()) +
                              "]");
    Catalog cat;
    if (config.storms == static_cast<int>(full.storms.size())) {
        cat = full;
    } else if (config.storms == 1) {
        cat.storms = {full.storms.front()};
    } else {
        const double step =
            static_cast<double>(full.storms.size() - 1) / (config.storms - 1);
        std::set<size_t> picked;
        for (int k = 0; k < config.storms; ++k)
            picked.insert(static_cast<size_t>(std::lround(k * step)));
        size_t extra = 0;  // rounding collisions: fill from the front
        while (static_cast<int>(picked.size()) < config.storms) picked.insert(extra++);
        for (size_t idx : picked) cat.storms.push_back(full.storms[idx]);
    }

    const int core_count = std::min(config.core_storms, static_cast<int>(cat.storms.size()));
    const std::set<int> core = select_core_storms(cat, core_count);
    for (auto& s : cat.storms) s.is_core = core.count(s.storm_id) > 0;

    csv::write_file_atomic(dir / "storms.csv", format_storm_catalog(cat));
    std::string core_txt;
    for (int id : core) core_txt += std::to_string(id) + "\n";
    csv::write_file_atomic(dir / "core_storms.txt", core_txt);

    const std::vector<Landscape> landscapes = generate_landscapes(config.points);
    for (const auto& ls : landscapes) {
        const std::string stem = "landscape_" + ls.scenario + "_" + std::to_string(ls.year);
        csv::write_file_atomic(dir / (stem + ".csv"), format_landscape_points(ls));
        json meta;
        meta["scenario"] = ls.scenario;
        meta["year"] = ls.year;
        meta["msl_m"] = ls.msl;
        csv::write_file_atomic(dir / (stem + ".json"), meta.dump(2) + "\n");
    }

    GenResult res;
    res.landscapes = static_cast<int>(landscapes.size());
    res.storms = static_cast<int>(cat.storms.size());
    res.core = core_count;
    res.points = config.points;
    return res;
}

StudyInputs load_study_inputs(const std::string& dir) {
    const fs::path d(dir);
    const fs::path storms_path = d / "storms.csv";
    const fs::path core_path = d / "core_storms.txt";
    if (!fs::exists(storms_path))
        throw ValidationError("missing study input: " + storms_path.string() + " (run gen first)");
    if (!fs::exists(core_path))
        throw ValidationError("missing study input: " + core_path.string() + " (run gen first)");

    std::set<int> core;
    for (const auto& line : csv::lines_of(csv::read_file(core_path))) {
        const std::string t = csv::trim(line);
        if (t.empty()) continue;
        core.insert(static_cast<int>(csv::parse_int(t, 0, "core_storms")));
    }
    StudyInputs inputs;
    inputs.catalog = parse_storm_catalog(csv::read_file(storms_path), core);

    std::vector<fs::path> metas;
    for (const auto& entry : fs::directory_iterator(d)) {
        const std::string name = entry.path().filename().string();
        if (name.rfind("landscape_", 0) == 0 && entry.path().extension() == ".json")
            metas.push_back(entry.path());
    }
    std::sort(metas.begin(), metas.end());
    if (metas.empty())
        throw ValidationError("no landscape files found in " + dir + " (run gen first)");
    for (const auto& meta_path : metas) {
        json meta = json::parse(csv::read_file(meta_path));
        fs::path csv_path = meta_path;
        csv_path.replace_extension(".csv");
        if (!fs::exists(csv_path))
            throw ValidationError("missing landscape table: " + csv_path.string());
        inputs.landscapes.push_back(parse_landscape(csv::read_file(csv_path),
                                                    meta.at("scenario").get<std::string>(),
                                                    meta.at("year").get<int>(),
                                                    meta.at("msl_m").get<double>()));
    }
    std::sort(inputs.landscapes.begin(), inputs.landscapes.end(),
              [](const Landscape& a, const Landscape& b) { return a.key() < b.key(); });
    return inputs;
}

}  // namespace nnwave
