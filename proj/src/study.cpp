#include "nnwave/study.hpp"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <json.hpp>
#include <thread>

#include "nnwave/csv.hpp"
#include "nnwave/storm_table.hpp"

namespace nnwave {

namespace fs = std::filesystem;
using nlohmann::json;

TrainConfig StudyConfig::desk_train_defaults() {
    TrainConfig t;
    t.profile = "small";
    t.batch_size = 256;
    t.max_epochs = 18;
    t.steps_per_epoch = 192;
    t.early_stop_patience = 6;
    t.val_row_cap = 20000;
    return t;
}

std::string StudyConfig::resolved_out_dir() const {
    if (!out_dir.empty()) return out_dir;
    if (const char* root = std::getenv("NNWAVE_OUTPUT_ROOT"); root && *root)
        return (fs::path(root) / "study").string();
    return "study";
}

AepGrid StudyConfig::grid() const {
    if (aep_grid.empty()) return AepGrid::standard();
    AepGrid g;
    g.aep = aep_grid;
    g.validate();
    return g;
}

int StudyConfig::resolved_jobs() const {
    if (jobs > 0) return jobs;
    const unsigned hw = std::thread::hardware_concurrency();
    return hw > 0 ? static_cast<int>(hw) : 1;
}

std::vector<Variant> StudyConfig::variant_list() const {
    std::vector<Variant> out;
    for (const auto& name : variants) out.push_back(variant_from_name(name));
    if (out.empty()) throw ConfigError("variants list is empty");
    return out;
}

namespace {

json config_to_json_impl(const StudyConfig& c) {
    json j;
    j["out_dir"] = c.out_dir;
    j["gen"] = {{"points", c.points},
                {"storms", c.storms},
                {"core_storms", c.core_storms},
                {"catalog_file", c.catalog_file}};
    j["oracle"] = {{"p_far", c.oracle.p_far},
                   {"k_v", c.oracle.k_v},
                   {"k_s", c.oracle.k_s},
                   {"gamma", c.oracle.gamma},
                   {"landfall_lat", c.oracle.landfall_lat},
                   {"asym_amp", c.oracle.asym_amp},
                   {"vf_gain", c.oracle.vf_gain},
                   {"surge_dist_base", c.oracle.surge_dist_base},
                   {"surge_dist_rmax", c.oracle.surge_dist_rmax},
                   {"shoal_amp", c.oracle.shoal_amp},
                   {"shoal_scale", c.oracle.shoal_scale},
                   {"friction_gain", c.oracle.friction_gain},
                   {"wave_energy", c.oracle.wave_energy},
                   {"wave_dist_base", c.oracle.wave_dist_base},
                   {"wave_dist_rmax", c.oracle.wave_dist_rmax},
                   {"z0_gain", c.oracle.z0_gain},
                   {"canopy_gain", c.oracle.canopy_gain},
                   {"slope_amp", c.oracle.slope_amp},
                   {"slope_scale", c.oracle.slope_scale}};
    j["train"] = {{"profile", c.train.profile},
                  {"batch_size", c.train.batch_size},
                  {"max_epochs", c.train.max_epochs},
                  {"steps_per_epoch", c.train.steps_per_epoch},
                  {"early_stop_patience", c.train.early_stop_patience},
                  {"lr_initial", c.train.lr_initial},
                  {"lr_factor", c.train.lr_factor},
                  {"lr_floor", c.train.lr_floor},
                  {"lr_patience", c.train.lr_patience},
                  {"val_modulus", c.train.val_modulus},
                  {"val_row_cap", c.train.val_row_cap}};
    j["variants"] = c.variants;
    j["seeds"] = c.seeds;
    j["hazard"] = {{"alpha", c.alpha},
                   {"total_rate", c.total_rate},
                   {"rates_source", c.rates_source},
                   {"rates_file", c.rates_file},
                   {"nrmse_normalizer", c.nrmse_normalizer},
                   {"aep_grid", c.aep_grid}};
    j["jobs"] = c.jobs;
    return j;
}

StudyConfig config_from_json(const json& j) {
    StudyConfig c;
    c.out_dir = j.at("out_dir").get<std::string>();
    const auto& g = j.at("gen");
    c.points = g.at("points").get<int>();
    c.storms = g.at("storms").get<int>();
    c.core_storms = g.at("core_storms").get<int>();
    c.catalog_file = g.at("catalog_file").get<std::string>();
    const auto& o = j.at("oracle");
    c.oracle.p_far = o.at("p_far").get<double>();
    c.oracle.k_v = o.at("k_v").get<double>();
    c.oracle.k_s = o.at("k_s").get<double>();
    c.oracle.gamma = o.at("gamma").get<double>();
    c.oracle.landfall_lat = o.at("landfall_lat").get<double>();
    c.oracle.asym_amp = o.at("asym_amp").get<double>();
    c.oracle.vf_gain = o.at("vf_gain").get<double>();
    c.oracle.surge_dist_base = o.at("surge_dist_base").get<double>();
    c.oracle.surge_dist_rmax = o.at("surge_dist_rmax").get<double>();
    c.oracle.shoal_amp = o.at("shoal_amp").get<double>();
    c.oracle.shoal_scale = o.at("shoal_scale").get<double>();
    c.oracle.friction_gain = o.at("friction_gain").get<double>();
    c.oracle.wave_energy = o.at("wave_energy").get<double>();
    c.oracle.wave_dist_base = o.at("wave_dist_base").get<double>();
    c.oracle.wave_dist_rmax = o.at("wave_dist_rmax").get<double>();
    c.oracle.z0_gain = o.at("z0_gain").get<double>();
    c.oracle.canopy_gain = o.at("canopy_gain").get<double>();
    c.oracle.slope_amp = o.at("slope_amp").get<double>();
    c.oracle.slope_scale = o.at("slope_scale").get<double>();
    const auto& t = j.at("train");
    c.train.profile = t.at("profile").get<std::string>();
    c.train.batch_size = t.at("batch_size").get<int>();
    c.train.max_epochs = t.at("max_epochs").get<int>();
    c.train.steps_per_epoch = t.at("steps_per_epoch").get<int>();
    c.train.early_stop_patience = t.at("early_stop_patience").get<int>();
    c.train.lr_initial = t.at("lr_initial").get<double>();
    c.train.lr_factor = t.at("lr_factor").get<double>();
    c.train.lr_floor = t.at("lr_floor").get<double>();
    c.train.lr_patience = t.at("lr_patience").get<int>();
    c.train.val_modulus = t.at("val_modulus").get<int>();
    c.train.val_row_cap = t.at("val_row_cap").get<int>();
    c.variants = j.at("variants").get<std::vector<std::string>>();
    c.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
    const auto& h = j.at("hazard");
    c.alpha = h.at("alpha").get<double>();
    c.total_rate = h.at("total_rate").get<double>();
    c.rates_source = h.at("rates_source").get<std::string>();
    c.rates_file = h.at("rates_file").get<std::string>();
    c.nrmse_normalizer = h.at("nrmse_normalizer").get<std::string>();
    c.aep_grid = h.at("aep_grid").get<std::vector<double>>();
    c.jobs = j.at("jobs").get<int>();
    if (!(c.alpha > 0 && c.alpha < 1)) throw ConfigError("alpha must lie in (0, 1)");
    if (c.seeds.empty()) throw ConfigError("seeds list is empty");
    return c;
}

void check_known_keys(const json& defaults, const json& given, const std::string& prefix) {
    for (const auto& [key, value] : given.items()) {
        if (!defaults.contains(key))
            throw ConfigError("unknown config key '" + prefix + key + "'");
        if (value.is_object() && defaults.at(key).is_object())
            check_known_keys(defaults.at(key), value, prefix + key + ".");
    }
}

void deep_merge(json& base, const json& overlay) {
    for (const auto& [key, value] : overlay.items()) {
        if (value.is_object() && base.contains(key) && base.at(key).is_object())
            deep_merge(base[key], value);
        else
            base[key] = value;
    }
}

}  // namespace

std::string config_to_json(const StudyConfig& config) {
    return config_to_json_impl(config).dump(2) + "\n";
}

StudyConfig load_config(const std::string& config_path,
                        const std::vector<std::string>& overrides) {
    json merged = config_to_json_impl(StudyConfig{});
    if (!config_path.empty()) {
        json user;
        try {
            user = json::parse(csv::read_file(config_path));
        } catch (const json::exception& e) {
            throw ConfigError("config file " + config_path + " is not valid JSON: " + e.what());
        }
        check_known_keys(merged, user, "");
        deep_merge(merged, user);
    }
    for (const std::string& ov : overrides) {
        const auto eq = ov.find('=');
        if (eq == std::string::npos)
            throw ConfigError("--set expects key=value, got '" + ov + "'");
        const std::string key = ov.substr(0, eq);
        const std::string value = ov.substr(eq + 1);
        std::string pointer = "/" + key;
        std::replace(pointer.begin(), pointer.end(), '.', '/');
        json::json_pointer ptr(pointer);
        if (!merged.contains(ptr))
            throw ConfigError("unknown config key '" + key + "'");
        json parsed;
        try {
            parsed = json::parse(value);
        } catch (const json::exception&) {
            parsed = value;  // bare strings need no quotes
        }
        merged[ptr] = parsed;
    }
    try {
        return config_from_json(merged);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("malformed config value: ") + e.what());
    }
}

std::string sims_filename(const LandscapeKey& ls) {
    return "sims_" + ls.scenario + "_" + std::to_string(ls.year) + ".csv";
}

std::string hazard_filename(const std::string& source, const LandscapeKey& ls) {
    return "hazard_" + source + "_" + ls.scenario + "_" + std::to_string(ls.year) + ".csv";
}

SimulationTable load_sims(const std::string& dir, const std::vector<Landscape>& landscapes) {
    SimulationTable table;
    for (const auto& ls : landscapes) {
        const fs::path path = fs::path(dir) / sims_filename(ls.key());
        if (!fs::exists(path))
            throw ValidationError("missing upstream artifact: " + path.string() +
                                  " (run simulate first)");
        const auto lines = csv::lines_of(csv::read_file(path));
        if (lines.empty() ||
            csv::split(lines[0], ',') !=
                std::vector<std::string>{"storm_id", "point_id", "surge_m", "hs_m"})
            throw ParseError(path.string() + ": expected header storm_id,point_id,surge_m,hs_m");
        for (size_t i = 1; i < lines.size(); ++i) {
            if (csv::trim(lines[i]).empty()) continue;
            const auto tok = csv::split(lines[i], ',');
            const int row = static_cast<int>(i) + 1;
            if (tok.size() != 4)
                throw ParseError(path.string() + ": row " + std::to_string(row) +
                                 " has wrong field count");
            SimulationRecord rec;
            rec.storm_id = static_cast<int>(csv::parse_int(tok[0], row, "storm_id"));
            rec.point_id = static_cast<int>(csv::parse_int(tok[1], row, "point_id"));
            rec.surge = csv::parse_double(tok[2], row, "surge_m");
            rec.hs = csv::parse_double(tok[3], row, "hs_m");
            if (rec.hs < 0)
                throw ValidationError(path.string() + ": row " + std::to_string(row) +
                                      ": hs must be nonnegative");
            table.insert(ls.key(), rec);
        }
    }
    return table;
}

StormRates study_rates(const StudyConfig& config, const Catalog& catalog) {
    std::set<int> core;
    for (const auto& s : catalog.storms)
        if (s.is_core) core.insert(s.storm_id);
    if (config.rates_source == "synthetic")
        return synthetic_rates(catalog, core, config.total_rate);
    if (config.rates_source != "file")
        throw ConfigError("rates_source must be 'synthetic' or 'file'");
    if (config.rates_file.empty()) throw ConfigError("rates_source=file needs rates_file");
    StormRates rates;
    const auto lines = csv::lines_of(csv::read_file(config.rates_file));
    if (lines.empty() || csv::split(lines[0], ',') !=
                             std::vector<std::string>{"storm_id", "rate_per_year"})
        throw ParseError(config.rates_file + ": expected header storm_id,rate_per_year");
    for (size_t i = 1; i < lines.size(); ++i) {
        if (csv::trim(lines[i]).empty()) continue;
        const auto tok = csv::split(lines[i], ',');
        const int row = static_cast<int>(i) + 1;
        if (tok.size() != 2)
            throw ParseError(config.rates_file + ": row " + std::to_string(row) +
                             " has wrong field count");
        rates.rate[static_cast<int>(csv::parse_int(tok[0], row, "storm_id"))] =
            csv::parse_double(tok[1], row, "rate_per_year");
    }
    rates.validate();
    return rates;
}

void cmd_gen(const StudyConfig& config, bool force) {
    GenConfig gc;
    gc.points = config.points;
    gc.storms = config.storms;
    gc.core_storms = config.core_storms;
    gc.catalog_csv = config.catalog_file.empty() ? std::string(bundled_storm_table())
                                                 : csv::read_file(config.catalog_file);
    const GenResult res = generate_study(gc, config.resolved_out_dir(), force);
    std::printf("status=ok cmd=gen out=%s landscapes=%d storms=%d core=%d points=%d\n",
                config.resolved_out_dir().c_str(), res.landscapes, res.storms, res.core,
                res.points);
}

void cmd_simulate(const StudyConfig& config, bool /*force*/) {
    const std::string dir = config.resolved_out_dir();
    const StudyInputs inputs = load_study_inputs(dir);
    config.oracle.validate();
    const SimulationTable table = generate_simulations(
        inputs.catalog, inputs.landscapes, config.oracle,
        default_subset_rule(inputs.catalog, "Baseline"));
    std::size_t rows = 0;
    for (const auto& lk : table.landscape_keys()) {
        std::string out = "storm_id,point_id,surge_m,hs_m\n";
        for (const auto& rec : table.records(lk)) {
            out += std::to_string(rec.storm_id) + "," + std::to_string(rec.point_id) + "," +
                   csv::format_double(rec.surge) + "," + csv::format_double(rec.hs) + "\n";
            ++rows;
        }
        csv::write_file_atomic(fs::path(dir) / sims_filename(lk), out);
    }
    std::printf("status=ok cmd=simulate out=%s landscapes=%zu rows=%zu\n", dir.c_str(),
                table.landscape_keys().size(), rows);
}

void cmd_train(const StudyConfig& config, bool force) {
    const std::string dir = config.resolved_out_dir();
    const StudyInputs inputs = load_study_inputs(dir);
    const SimulationTable table = load_sims(dir, inputs.landscapes);
    const StudySummary summary =
        run_study(inputs.landscapes, inputs.catalog, table, config.variant_list(), config.train,
                  config.seeds, dir, config.resolved_jobs(), force);
    int ok = 0, diverged = 0, cached = 0;
    for (const auto& [key, cell] : summary.cells) {
        if (cell.status == "ok") ++ok;
        else if (cell.status == "diverged") ++diverged;
        else ++cached;
    }
    std::printf("status=ok cmd=train out=%s cells=%zu ok=%d cached=%d diverged=%d\n", dir.c_str(),
                summary.cells.size(), ok, cached, diverged);
}

void cmd_predict(const StudyConfig& config, const std::string& model_path,
                 const std::string& scenario, int year, const std::string& out_path,
                 const std::string& dump_features_path) {
    const std::string dir = config.resolved_out_dir();
    const ModelDocument doc = load_model_file(model_path);
    const StudyInputs inputs = load_study_inputs(dir);

    const LandscapeKey key{scenario, year};
    const Landscape* landscape = nullptr;
    for (const auto& ls : inputs.landscapes)
        if (ls.key() == key) landscape = &ls;
    if (!landscape)
        throw ValidationError("landscape " + key.label() + " is not part of the study");

    if (doc.schema != make_schema(doc.schema.variant))
        throw ValidationError("model schema does not match the canonical " +
                              variant_name(doc.schema.variant) + " feature contract");

    std::vector<int> storms;
    for (const auto& s : inputs.catalog.storms)
        if (landscape->scenario == "Baseline" || s.is_core) storms.push_back(s.storm_id);
    std::sort(storms.begin(), storms.end());
    std::vector<RowKey> keys;
    for (int sid : storms)
        for (const auto& pt : landscape->points) keys.push_back({key, sid, pt.point_id});

    const FeatureSchema base = make_schema(Variant::M1);
    Dataset ds = assemble_rows(keys, inputs.catalog, inputs.landscapes, base,
                               SurgeSource::none(), nullptr);
    Eigen::MatrixXd x = ds.inputs;
    if (doc.schema.variant == Variant::M3) {
        std::vector<Landscape> one = {*landscape};
        const SimulationTable table = load_sims(dir, one);
        Eigen::MatrixXd with_surge(x.rows(), x.cols() + 1);
        for (Eigen::Index i = 0; i < x.rows(); ++i) {
            with_surge.row(i).head(x.cols()) = x.row(i);
            with_surge(i, x.cols()) = table.at(key, keys[i].storm_id, keys[i].point_id).surge;
        }
        x = std::move(with_surge);
    } else if (doc.schema.variant == Variant::M2) {
        if (!doc.surge_model)
            throw LoadError("M2 model document has no embedded surge surrogate");
        Eigen::VectorXd surge = predict_with_model(*doc.surge_model, x).col(0);
        Eigen::MatrixXd with_surge(x.rows(), x.cols() + 1);
        with_surge << x, surge;
        x = std::move(with_surge);
    }

    if (!dump_features_path.empty()) {
        Dataset dump = ds;
        dump.schema = doc.schema;
        dump.inputs = x;
        dump.targets.resize(x.rows(), 0);
        csv::write_file_atomic(dump_features_path, format_dataset_csv(dump));
    }

    const Eigen::MatrixXd pred = predict_with_model(doc, x);
    const bool with_surge_out = doc.schema.variant == Variant::M4;
    std::string out = with_surge_out ? "storm_id,point_id,pred_hs_m,pred_surge_m\n"
                                     : "storm_id,point_id,pred_hs_m\n";
    for (size_t i = 0; i < keys.size(); ++i) {
        const Eigen::Index r = static_cast<Eigen::Index>(i);
        const double hs = with_surge_out ? pred(r, 1) : pred(r, 0);
        out += std::to_string(keys[i].storm_id) + "," + std::to_string(keys[i].point_id) + "," +
               csv::format_double(hs);
        if (with_surge_out) out += "," + csv::format_double(pred(r, 0));
        out += "\n";
    }
    const std::string path =
        out_path.empty()
            ? (fs::path(dir) / ("predict_" + variant_name(doc.schema.variant) + "_" +
                                scenario + "_" + std::to_string(year) + ".csv"))
                  .string()
            : out_path;
    csv::write_file_atomic(path, out);
    std::printf("status=ok cmd=predict out=%s rows=%zu\n", path.c_str(), keys.size());
}

void cmd_hazard(const StudyConfig& config, bool /*force*/) {
    const std::string dir = config.resolved_out_dir();
    const StudyInputs inputs = load_study_inputs(dir);
    const SimulationTable table = load_sims(dir, inputs.landscapes);
    const StormRates rates = study_rates(config, inputs.catalog);
    const AepGrid grid = config.grid();

    std::set<int> core;
    for (const auto& s : inputs.catalog.storms)
        if (s.is_core) core.insert(s.storm_id);

    const std::vector<Fold> folds = make_folds(inputs.landscapes, inputs.catalog);
    const int jobs = config.resolved_jobs();
    int files = 0, cells = 0;
    for (const Fold& fold : folds) {
        const auto ref = curves_from_table(table, fold.held_out, core, rates, grid, jobs);
        csv::write_file_atomic(fs::path(dir) / hazard_filename("oracle", fold.held_out),
                               format_hazard_csv(ref));
        ++files;
        for (const std::string& vname : config.variants) {
            const Variant v = variant_from_name(vname);
            for (std::uint64_t seed : config.seeds) {
                const fs::path pred_path =
                    fs::path(dir) / predictions_filename(v, fold.held_out, seed);
                if (!fs::exists(pred_path)) continue;  // diverged or not yet trained
                const PredictionSet preds =
                    load_predictions_file(pred_path.string(), v, fold.held_out, seed);
                const auto curves = curves_from_predictions(preds, rates, grid, jobs);
                const std::string source = vname + "_s" + std::to_string(seed);
                csv::write_file_atomic(fs::path(dir) / hazard_filename(source, fold.held_out),
                                       format_hazard_csv(curves));
                ++files;
                ++cells;
            }
        }
    }
    if (cells == 0)
        throw ValidationError("no prediction files found in " + dir + " (run train first)");
    std::printf("status=ok cmd=hazard out=%s files=%d cells=%d\n", dir.c_str(), files, cells);
}

void cmd_report(const StudyConfig& config) {
    const std::string dir = config.resolved_out_dir();
    const StudyInputs inputs = load_study_inputs(dir);
    const SimulationTable table = load_sims(dir, inputs.landscapes);
    const AepGrid grid = config.grid();

    ReportInputs rin;
    rin.table = &table;
    rin.grid = grid;
    rin.alpha = config.alpha;
    rin.nrmse_normalizer = config.nrmse_normalizer;

    const std::vector<Fold> folds = make_folds(inputs.landscapes, inputs.catalog);
    for (const Fold& fold : folds) {
        const fs::path ref_path = fs::path(dir) / hazard_filename("oracle", fold.held_out);
        if (!fs::exists(ref_path))
            throw ValidationError("missing upstream artifact: " + ref_path.string() +
                                  " (run hazard first)");
        rin.reference_curves[fold.held_out] =
            parse_hazard_csv(csv::read_file(ref_path), grid);
        for (const std::string& vname : config.variants) {
            const Variant v = variant_from_name(vname);
            for (std::uint64_t seed : config.seeds) {
                const fs::path pred_path =
                    fs::path(dir) / predictions_filename(v, fold.held_out, seed);
                if (!fs::exists(pred_path)) continue;
                const std::string source = vname + "_s" + std::to_string(seed);
                const fs::path hz_path = fs::path(dir) / hazard_filename(source, fold.held_out);
                if (!fs::exists(hz_path))
                    throw ValidationError("missing upstream artifact: " + hz_path.string() +
                                          " (run hazard first)");
                rin.predictions.push_back(
                    load_predictions_file(pred_path.string(), v, fold.held_out, seed));
                rin.prediction_curves[cell_key(v, fold.held_out, seed)] =
                    parse_hazard_csv(csv::read_file(hz_path), grid);
            }
        }
    }
    if (rin.predictions.empty())
        throw ValidationError("no prediction files found in " + dir + " (run train first)");

    const ReportBundle bundle = build_reports(rin);
    csv::write_file_atomic(fs::path(dir) / "report_table1.csv", bundle.table1_csv);
    csv::write_file_atomic(fs::path(dir) / "report_table2.csv", bundle.table2_csv);
    csv::write_file_atomic(fs::path(dir) / "report_fig1.csv", bundle.fig1_csv);
    csv::write_file_atomic(fs::path(dir) / "report_fig2.csv", bundle.fig2_csv);
    csv::write_file_atomic(fs::path(dir) / "report_fig3_fig4.csv", bundle.fig34_csv);
    csv::write_file_atomic(fs::path(dir) / "study_metrics.json", bundle.metrics_json);
    std::printf("status=ok cmd=report out=%s cells=%zu\n", dir.c_str(), rin.predictions.size());
}

}  // namespace nnwave
