#include "nnwave/features.hpp"

#include <algorithm>
#include <map>
#include <unordered_map>

#include "nnwave/csv.hpp"

namespace nnwave {

namespace {

const std::vector<std::string> kBaseFeatures = {
    "heading", "v_f", "r_max", "landfall_lon", "c_p", "lon", "lat",
    "elevation", "avg_slope", "manning_n", "z0", "canopy", "msl"};

}  // namespace

std::string variant_name(Variant v) {
    switch (v) {
        case Variant::M1: return "M1";
        case Variant::M2: return "M2";
        case Variant::M3: return "M3";
        case Variant::M4: return "M4";
    }
    throw ValidationError("unknown variant");
}

Variant variant_from_name(const std::string& name) {
    if (name == "M1") return Variant::M1;
    if (name == "M2") return Variant::M2;
    if (name == "M3") return Variant::M3;
    if (name == "M4") return Variant::M4;
    throw ValidationError("unknown model variant '" + name + "' (expected M1..M4)");
}

FeatureSchema make_schema(Variant v) {
    FeatureSchema s;
    s.variant = v;
    s.feature_names = kBaseFeatures;
    if (v == Variant::M2 || v == Variant::M3) s.feature_names.push_back("surge");
    s.input_dim = static_cast<int>(s.feature_names.size());
    s.output_dim = v == Variant::M4 ? 2 : 1;
    return s;
}

Dataset assemble(const SimulationTable& table, const Catalog& catalog,
                 const std::vector<Landscape>& landscapes, const FeatureSchema& schema,
                 const SurgeSource& surge_source) {
    std::vector<RowKey> keys;
    for (const auto& lk : table.landscape_keys())
        for (const auto& rec : table.records(lk))
            keys.push_back({lk, rec.storm_id, rec.point_id});
    std::sort(keys.begin(), keys.end());
    return assemble_rows(keys, catalog, landscapes, schema, surge_source, &table);
}

Dataset assemble_rows(const std::vector<RowKey>& keys, const Catalog& catalog,
                      const std::vector<Landscape>& landscapes, const FeatureSchema& schema,
                      const SurgeSource& surge_source, const SimulationTable* table) {
    const bool wants_surge_feature =
        schema.variant == Variant::M2 || schema.variant == Variant::M3;
    if (schema.variant == Variant::M2 && surge_source.kind != SurgeSource::Kind::predicted)
        throw ConfigError("M2 requires a predicted surge source");
    if (schema.variant == Variant::M3 && surge_source.kind != SurgeSource::Kind::simulated)
        throw ConfigError("M3 requires the simulated surge source");
    if (!wants_surge_feature && surge_source.kind != SurgeSource::Kind::none)
        throw ConfigError(variant_name(schema.variant) + " takes no surge feature");
    if (surge_source.kind == SurgeSource::Kind::predicted && !surge_source.predicted)
        throw ConfigError("predicted surge source has no lookup");
    if (surge_source.kind == SurgeSource::Kind::simulated && table == nullptr)
        throw ConfigError("simulated surge source requires a simulation table");

    std::unordered_map<int, const StormRecord*> storms;
    for (const auto& s : catalog.storms) storms.emplace(s.storm_id, &s);
    std::map<LandscapeKey, const Landscape*> lss;
    for (const auto& ls : landscapes) lss.emplace(ls.key(), &ls);

    Dataset ds;
    ds.schema = schema;
    ds.keys = keys;
    const Eigen::Index n = static_cast<Eigen::Index>(keys.size());
    ds.inputs.resize(n, schema.input_dim);
    const bool with_targets = table != nullptr;
    ds.targets.resize(n, with_targets ? schema.output_dim : 0);

    // Point lookup cache per landscape: the grid is shared, rows arrive
    // landscape-major, so one flat map per landscape amortizes well.
    const Landscape* cur_ls = nullptr;
    std::unordered_map<int, const GridPoint*> point_index;

    for (Eigen::Index i = 0; i < n; ++i) {
        const RowKey& key = keys[i];
        auto sit = storms.find(key.storm_id);
        if (sit == storms.end())
            throw ValidationError("row join failed: storm " + std::to_string(key.storm_id) +
                                  " not in catalog");
        auto lit = lss.find(key.landscape);
        if (lit == lss.end())
            throw ValidationError("row join failed: landscape " + key.landscape.label() +
                                  " not supplied");
        const Landscape& ls = *lit->second;
        if (cur_ls != &ls) {
            cur_ls = &ls;
            point_index.clear();
            for (const auto& p : ls.points) point_index.emplace(p.point_id, &p);
        }
        auto pit = point_index.find(key.point_id);
        if (pit == point_index.end())
            throw ValidationError("row join failed: point " + std::to_string(key.point_id) +
                                  " not in landscape " + key.landscape.label());
        const StormRecord& storm = *sit->second;
        const GridPoint& pt = *pit->second;

        ds.inputs(i, 0) = storm.heading;
        ds.inputs(i, 1) = storm.v_f;
        ds.inputs(i, 2) = storm.r_max;
        ds.inputs(i, 3) = storm.landfall_lon;
        ds.inputs(i, 4) = storm.c_p;
        ds.inputs(i, 5) = pt.lon;
        ds.inputs(i, 6) = pt.lat;
        ds.inputs(i, 7) = pt.elevation;
        ds.inputs(i, 8) = pt.avg_slope;
        ds.inputs(i, 9) = pt.manning_n;
        ds.inputs(i, 10) = pt.z0;
        ds.inputs(i, 11) = pt.canopy;
        ds.inputs(i, 12) = ls.msl;
        if (wants_surge_feature) {
            double surge = surge_source.kind == SurgeSource::Kind::simulated
                               ? table->at(key.landscape, key.storm_id, key.point_id).surge
                               : surge_source.predicted(key);
            ds.inputs(i, 13) = surge;
        }
        if (with_targets) {
            const SimulationRecord& rec = table->at(key.landscape, key.storm_id, key.point_id);
            if (schema.variant == Variant::M4) {
                ds.targets(i, 0) = rec.surge;
                ds.targets(i, 1) = rec.hs;
            } else {
                ds.targets(i, 0) = rec.hs;
            }
        }
    }
    return ds;
}

bool Scaler::operator==(const Scaler& o) const {
    auto eq = [](const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
        return a.size() == b.size() && a == b;
    };
    return fitted == o.fitted && eq(input_mean, o.input_mean) && eq(input_std, o.input_std) &&
           eq(target_mean, o.target_mean) && eq(target_std, o.target_std);
}

namespace {

void column_stats(const Eigen::MatrixXd& m, Eigen::VectorXd& mean, Eigen::VectorXd& std) {
    const double n = static_cast<double>(m.rows());
    mean = m.colwise().mean();
    Eigen::MatrixXd centered = m.rowwise() - mean.transpose();
    std = (centered.array().square().colwise().sum() / n).sqrt();
    for (Eigen::Index j = 0; j < std.size(); ++j)
        if (std(j) < 1e-12) std(j) = 1.0;
}

}  // namespace

Scaler fit_scaler(const Dataset& train) {
    if (train.rows() == 0) throw ConfigError("cannot fit scaler on an empty dataset");
    if (train.targets.cols() == 0)
        throw ConfigError("cannot fit scaler without target columns");
    Scaler s;
    column_stats(train.inputs, s.input_mean, s.input_std);
    column_stats(train.targets, s.target_mean, s.target_std);
    s.fitted = true;
    return s;
}

Dataset apply(const Scaler& scaler, const Dataset& ds) {
    if (!scaler.fitted) throw ConfigError("scaler has not been fitted");
    if (ds.inputs.cols() != scaler.input_mean.size())
        throw ValidationError("scaler/input width mismatch");
    Dataset out = ds;
    out.inputs = (ds.inputs.rowwise() - scaler.input_mean.transpose()).array().rowwise() /
                 scaler.input_std.transpose().array();
    if (ds.targets.cols() > 0) {
        if (ds.targets.cols() != scaler.target_mean.size())
            throw ValidationError("scaler/target width mismatch");
        out.targets = (ds.targets.rowwise() - scaler.target_mean.transpose()).array().rowwise() /
                      scaler.target_std.transpose().array();
    }
    return out;
}

Eigen::MatrixXd invert_targets(const Scaler& scaler, const Eigen::MatrixXd& preds) {
    if (!scaler.fitted) throw ConfigError("scaler has not been fitted");
    if (preds.cols() != scaler.target_mean.size())
        throw ValidationError("scaler/prediction width mismatch");
    return (preds.array().rowwise() * scaler.target_std.transpose().array()).rowwise() +
           scaler.target_mean.transpose().array();
}

std::string format_dataset_csv(const Dataset& ds) {
    std::string out = "scenario,year,storm_id,point_id";
    for (const auto& name : ds.schema.feature_names) out += "," + name;
    const bool two_targets = ds.targets.cols() == 2;
    if (ds.targets.cols() > 0) out += two_targets ? ",target_surge_m,target_hs_m" : ",target_hs_m";
    out += "\n";
    for (Eigen::Index i = 0; i < ds.rows(); ++i) {
        const RowKey& k = ds.keys[i];
        out += k.landscape.scenario + "," + std::to_string(k.landscape.year) + "," +
               std::to_string(k.storm_id) + "," + std::to_string(k.point_id);
        for (Eigen::Index j = 0; j < ds.inputs.cols(); ++j)
            out += "," + csv::format_double(ds.inputs(i, j));
        for (Eigen::Index j = 0; j < ds.targets.cols(); ++j)
            out += "," + csv::format_double(ds.targets(i, j));
        out += "\n";
    }
    return out;
}

}  // namespace nnwave
