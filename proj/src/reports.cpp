#include "nnwave/reports.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <json.hpp>
#include <mutex>
#include <thread>

#include "nnwave/csv.hpp"

namespace nnwave {

using nlohmann::json;

namespace {

std::string fixed3(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.3f", v);
    return buf;
}

std::string fixed2(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f", v);
    return buf;
}

double mean_of(const std::vector<double>& v) {
    double s = 0;
    for (double x : v) s += x;
    return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

}  // namespace

std::string format_hazard_csv(const std::vector<HazardCurve>& curves) {
    std::string out = "point_id,aep,hs_m\n";
    for (const auto& c : curves)
        for (size_t i = 0; i < c.aep.size(); ++i)
            out += std::to_string(c.point_id) + "," + csv::format_double(c.aep[i]) + "," +
                   csv::format_double(c.hs[i]) + "\n";
    return out;
}

std::vector<HazardCurve> parse_hazard_csv(const std::string& text, const AepGrid& grid) {
    const auto lines = csv::lines_of(text);
    if (lines.empty() || csv::split(lines[0], ',') !=
                             std::vector<std::string>{"point_id", "aep", "hs_m"})
        throw ParseError("hazard file: expected header point_id,aep,hs_m");
    std::vector<HazardCurve> curves;
    for (size_t i = 1; i < lines.size(); ++i) {
        if (csv::trim(lines[i]).empty()) continue;
        const auto tok = csv::split(lines[i], ',');
        const int row = static_cast<int>(i) + 1;
        if (tok.size() != 3)
            throw ParseError("hazard file: row " + std::to_string(row) + " has wrong field count");
        const int pid = static_cast<int>(csv::parse_int(tok[0], row, "point_id"));
        const double aep = csv::parse_double(tok[1], row, "aep");
        const double hs = csv::parse_double(tok[2], row, "hs_m");
        if (curves.empty() || curves.back().point_id != pid) {
            HazardCurve c;
            c.point_id = pid;
            curves.push_back(c);
        }
        curves.back().aep.push_back(aep);
        curves.back().hs.push_back(hs);
    }
    for (const auto& c : curves)
        if (c.aep != grid.aep)
            throw ValidationError("hazard file: point " + std::to_string(c.point_id) +
                                  " is not aligned to the AEP grid");
    return curves;
}

namespace {

// Fans per-point curve construction out over jobs threads; slot-indexed
// writes keep the output identical for any thread count.
std::vector<HazardCurve> curves_for_points(const std::map<int, std::map<int, double>>& by_point,
                                           const StormRates& rates, const AepGrid& grid,
                                           int jobs) {
    std::vector<const std::pair<const int, std::map<int, double>>*> items;
    items.reserve(by_point.size());
    for (const auto& entry : by_point) items.push_back(&entry);
    std::vector<HazardCurve> curves(items.size());
    const int n_threads = std::max(1, std::min<int>(jobs, static_cast<int>(items.size())));
    if (n_threads == 1) {
        for (size_t i = 0; i < items.size(); ++i)
            curves[i] = exceedance_curve(items[i]->second, rates, grid, items[i]->first);
        return curves;
    }
    std::atomic<size_t> next{0};
    std::exception_ptr error;
    std::mutex mu;
    auto worker = [&]() {
        while (true) {
            const size_t i = next.fetch_add(1);
            if (i >= items.size()) return;
            try {
                curves[i] = exceedance_curve(items[i]->second, rates, grid, items[i]->first);
            } catch (...) {
                std::lock_guard<std::mutex> lock(mu);
                if (!error) error = std::current_exception();
                return;
            }
        }
    };
    std::vector<std::thread> threads;
    for (int t = 0; t < n_threads; ++t) threads.emplace_back(worker);
    for (auto& th : threads) th.join();
    if (error) std::rethrow_exception(error);
    return curves;
}

}  // namespace

std::vector<HazardCurve> curves_from_table(const SimulationTable& table, const LandscapeKey& ls,
                                           const std::set<int>& storm_ids,
                                           const StormRates& rates, const AepGrid& grid,
                                           int jobs) {
    // collect peaks per point over the given storms
    std::map<int, std::map<int, double>> peaks_by_point;  // point -> storm -> hs
    for (const auto& rec : table.records(ls))
        if (storm_ids.count(rec.storm_id)) peaks_by_point[rec.point_id][rec.storm_id] = rec.hs;
    for (const auto& [pid, peaks] : peaks_by_point)
        if (peaks.size() != storm_ids.size())
            throw ValidationError("landscape " + ls.label() + ", point " + std::to_string(pid) +
                                  ": missing simulated peaks for some storms");
    return curves_for_points(peaks_by_point, rates, grid, jobs);
}

std::vector<HazardCurve> curves_from_predictions(const PredictionSet& preds,
                                                 const StormRates& rates, const AepGrid& grid,
                                                 int jobs) {
    std::map<int, std::map<int, double>> peaks_by_point;
    for (size_t i = 0; i < preds.keys.size(); ++i)
        peaks_by_point[preds.keys[i].point_id][preds.keys[i].storm_id] =
            preds.hs(static_cast<Eigen::Index>(i));
    return curves_for_points(peaks_by_point, rates, grid, jobs);
}

namespace {

struct CellMetrics {
    std::vector<double> rmse_hs, corr_hs;          // per seed
    std::vector<double> rmse_surge, corr_surge;    // per seed (M4 only)
    std::vector<double> ks_reject_pct;             // per seed
    std::vector<std::vector<double>> aep_rmse;     // per seed, per aep
    std::vector<std::vector<double>> aep_nrmse;    // per seed, per aep
};

std::string vl_key(const std::string& variant, const LandscapeKey& ls) {
    return variant + "/" + ls.scenario + "/" + std::to_string(ls.year);
}

}  // namespace

ReportBundle build_reports(const ReportInputs& inputs) {
    if (!inputs.table) throw ConfigError("report builder needs the simulation table");
    if (inputs.predictions.empty()) throw ConfigError("no prediction sets given");
    inputs.grid.validate();
    const size_t n_aep = inputs.grid.aep.size();
    const bool norm_range = inputs.nrmse_normalizer == "range";
    if (!norm_range && inputs.nrmse_normalizer != "mean")
        throw ConfigError("nrmse normalizer must be 'mean' or 'range'");

    std::map<std::string, CellMetrics> cells;  // variant/scenario/year
    std::set<std::string> variants;
    std::set<LandscapeKey> landscapes;

    // per-point squared-error accumulation for fig1/fig2, pooled over
    // everything (landscapes, storms, seeds) per variant
    std::map<std::string, std::map<int, std::pair<double, long>>> point_sq;  // variant -> point -> (sse, n)

    for (const PredictionSet& p : inputs.predictions) {
        const std::string vname = variant_name(p.variant);
        variants.insert(vname);
        landscapes.insert(p.landscape);
        CellMetrics& cell = cells[vl_key(vname, p.landscape)];

        const Eigen::Index n = static_cast<Eigen::Index>(p.keys.size());
        Eigen::VectorXd ref_hs(n), ref_surge(n);
        for (Eigen::Index i = 0; i < n; ++i) {
            const RowKey& k = p.keys[i];
            const SimulationRecord& rec = inputs.table->at(k.landscape, k.storm_id, k.point_id);
            ref_hs(i) = rec.hs;
            ref_surge(i) = rec.surge;
        }
        cell.rmse_hs.push_back(rmse(p.hs, ref_hs));
        cell.corr_hs.push_back(pearson(p.hs, ref_hs));
        if (p.surge.size() > 0) {
            cell.rmse_surge.push_back(rmse(p.surge, ref_surge));
            cell.corr_surge.push_back(pearson(p.surge, ref_surge));
        }
        for (Eigen::Index i = 0; i < n; ++i) {
            auto& acc = point_sq[vname][p.keys[i].point_id];
            const double e = p.hs(i) - ref_hs(i);
            acc.first += e * e;
            acc.second += 1;
        }

        // curve comparisons
        auto rit = inputs.reference_curves.find(p.landscape);
        if (rit == inputs.reference_curves.end())
            throw ConfigError("missing reference hazard curves for " + p.landscape.label());
        auto pit = inputs.prediction_curves.find(cell_key(p.variant, p.landscape, p.seed));
        if (pit == inputs.prediction_curves.end())
            throw ConfigError("missing prediction hazard curves for cell " +
                              cell_key(p.variant, p.landscape, p.seed));
        const auto& ref_curves = rit->second;
        const auto& pred_curves = pit->second;
        if (ref_curves.size() != pred_curves.size())
            throw ValidationError("curve sets for " + p.landscape.label() +
                                  " cover different point sets");

        int rejected = 0;
        Eigen::MatrixXd ref_vals(static_cast<Eigen::Index>(ref_curves.size()), n_aep);
        Eigen::MatrixXd pred_vals(static_cast<Eigen::Index>(ref_curves.size()), n_aep);
        for (size_t ci = 0; ci < ref_curves.size(); ++ci) {
            if (ref_curves[ci].point_id != pred_curves[ci].point_id)
                throw ValidationError("curve point ids are not aligned for " +
                                      p.landscape.label());
            const double d = ks_statistic(ref_curves[ci], pred_curves[ci]);
            if (ks_reject(d, inputs.alpha, static_cast<int>(n_aep))) ++rejected;
            for (size_t ai = 0; ai < n_aep; ++ai) {
                ref_vals(static_cast<Eigen::Index>(ci), static_cast<Eigen::Index>(ai)) =
                    ref_curves[ci].hs[ai];
                pred_vals(static_cast<Eigen::Index>(ci), static_cast<Eigen::Index>(ai)) =
                    pred_curves[ci].hs[ai];
            }
        }
        cell.ks_reject_pct.push_back(100.0 * rejected / static_cast<double>(ref_curves.size()));

        std::vector<double> per_aep_rmse(n_aep), per_aep_nrmse(n_aep);
        for (size_t ai = 0; ai < n_aep; ++ai) {
            const Eigen::VectorXd rv = ref_vals.col(static_cast<Eigen::Index>(ai));
            const Eigen::VectorXd pv = pred_vals.col(static_cast<Eigen::Index>(ai));
            const double e = rmse(pv, rv);
            per_aep_rmse[ai] = e;
            const double scale =
                norm_range ? (rv.maxCoeff() - rv.minCoeff()) : rv.mean();
            if (scale == 0.0)
                per_aep_nrmse[ai] = e == 0.0 ? 0.0
                                             : std::numeric_limits<double>::infinity();
            else
                per_aep_nrmse[ai] = e / scale;
        }
        cell.aep_rmse.push_back(std::move(per_aep_rmse));
        cell.aep_nrmse.push_back(std::move(per_aep_nrmse));
    }

    ReportBundle out;

    // Table 1 analogue: per (scenario, year, variant, target) RMSE and corr,
    // averaged over seeds, rendered in the paper's 3-decimal format.
    out.table1_csv = "scenario,year,variant,target,rmse_m,corr\n";
    for (const LandscapeKey& ls : landscapes) {
        for (const std::string& v : variants) {
            auto it = cells.find(vl_key(v, ls));
            if (it == cells.end()) continue;
            const CellMetrics& c = it->second;
            if (!c.rmse_surge.empty())
                out.table1_csv += ls.scenario + "," + std::to_string(ls.year) + "," + v +
                                  ",surge," + fixed3(mean_of(c.rmse_surge)) + "," +
                                  fixed3(mean_of(c.corr_surge)) + "\n";
            out.table1_csv += ls.scenario + "," + std::to_string(ls.year) + "," + v + ",hs," +
                              fixed3(mean_of(c.rmse_hs)) + "," + fixed3(mean_of(c.corr_hs)) +
                              "\n";
        }
    }

    // Table 2 analogue: K-S rejection percentages.
    out.table2_csv = "scenario,year,variant,rejected_pct\n";
    for (const LandscapeKey& ls : landscapes)
        for (const std::string& v : variants) {
            auto it = cells.find(vl_key(v, ls));
            if (it == cells.end()) continue;
            out.table2_csv += ls.scenario + "," + std::to_string(ls.year) + "," + v + "," +
                              fixed2(mean_of(it->second.ks_reject_pct)) + "\n";
        }

    // Fig. 1 analogue: survival function of per-point RMSE.
    out.fig1_csv = "rmse_threshold_m,pct_points_at_or_above,variant\n";
    std::map<std::string, std::map<int, double>> point_rmse;  // variant -> point -> rmse
    for (const auto& [v, per_point] : point_sq) {
        for (const auto& [pid, acc] : per_point)
            point_rmse[v][pid] = std::sqrt(acc.first / static_cast<double>(acc.second));
        std::vector<double> values;
        for (const auto& [pid, r] : point_rmse[v]) values.push_back(r);
        std::sort(values.begin(), values.end());
        const double npts = static_cast<double>(values.size());
        std::vector<double> uniq = values;
        uniq.erase(std::unique(uniq.begin(), uniq.end()), uniq.end());
        for (double t : uniq) {
            const auto lower = std::lower_bound(values.begin(), values.end(), t);
            const double pct = 100.0 * static_cast<double>(values.end() - lower) / npts;
            out.fig1_csv += csv::format_double(t) + "," + csv::format_double(pct) + "," + v + "\n";
        }
    }

    // Fig. 2 data analogue: per-point RMSE of the baseline and differences
    // (baseline minus model; positive = the model improves on the baseline).
    out.fig2_csv = "point_id,rmse_M1_m";
    std::vector<std::string> others;
    for (const std::string& v : variants)
        if (v != "M1") others.push_back(v);
    for (const std::string& v : others) out.fig2_csv += ",diff_" + v + "_m";
    out.fig2_csv += "\n";
    if (point_rmse.count("M1")) {
        for (const auto& [pid, base] : point_rmse["M1"]) {
            out.fig2_csv += std::to_string(pid) + "," + csv::format_double(base);
            for (const std::string& v : others) {
                auto it = point_rmse[v].find(pid);
                out.fig2_csv +=
                    "," + (it == point_rmse[v].end() ? std::string("")
                                                     : csv::format_double(base - it->second));
            }
            out.fig2_csv += "\n";
        }
    }

    // Figs. 3-4 analogue: per-AEP curve RMSE and NRMSE, seed-averaged.
    out.fig34_csv = "variant,scenario,year,aep,rmse_m,nrmse\n";
    for (const std::string& v : variants)
        for (const LandscapeKey& ls : landscapes) {
            auto it = cells.find(vl_key(v, ls));
            if (it == cells.end()) continue;
            const CellMetrics& c = it->second;
            for (size_t ai = 0; ai < n_aep; ++ai) {
                double r = 0, nr = 0;
                for (size_t s = 0; s < c.aep_rmse.size(); ++s) {
                    r += c.aep_rmse[s][ai];
                    nr += c.aep_nrmse[s][ai];
                }
                r /= static_cast<double>(c.aep_rmse.size());
                nr /= static_cast<double>(c.aep_nrmse.size());
                out.fig34_csv += v + "," + ls.scenario + "," + std::to_string(ls.year) + "," +
                                 csv::format_double(inputs.grid.aep[ai]) + "," +
                                 csv::format_double(r) + "," + csv::format_double(nr) + "\n";
            }
        }

    // Full-precision metrics for downstream tooling.
    json metrics;
    metrics["alpha"] = inputs.alpha;
    metrics["aep"] = inputs.grid.aep;
    json jcells = json::object();
    for (const auto& [key, c] : cells) {
        json jc;
        jc["rmse_hs_per_seed"] = c.rmse_hs;
        jc["corr_hs_per_seed"] = c.corr_hs;
        jc["rmse_hs_mean"] = mean_of(c.rmse_hs);
        jc["corr_hs_mean"] = mean_of(c.corr_hs);
        if (!c.rmse_surge.empty()) {
            jc["rmse_surge_per_seed"] = c.rmse_surge;
            jc["corr_surge_per_seed"] = c.corr_surge;
            jc["rmse_surge_mean"] = mean_of(c.rmse_surge);
            jc["corr_surge_mean"] = mean_of(c.corr_surge);
        }
        jc["ks_reject_pct_per_seed"] = c.ks_reject_pct;
        jc["ks_reject_pct_mean"] = mean_of(c.ks_reject_pct);
        std::vector<double> aep_rmse_mean(n_aep, 0.0), aep_nrmse_mean(n_aep, 0.0);
        for (size_t ai = 0; ai < n_aep; ++ai) {
            for (size_t s = 0; s < c.aep_rmse.size(); ++s) {
                aep_rmse_mean[ai] += c.aep_rmse[s][ai];
                aep_nrmse_mean[ai] += c.aep_nrmse[s][ai];
            }
            aep_rmse_mean[ai] /= static_cast<double>(c.aep_rmse.size());
            aep_nrmse_mean[ai] /= static_cast<double>(c.aep_nrmse.size());
        }
        jc["aep_rmse_mean"] = aep_rmse_mean;
        jc["aep_nrmse_mean"] = aep_nrmse_mean;
        jcells[key] = std::move(jc);
    }
    metrics["cells"] = std::move(jcells);
    out.metrics_json = metrics.dump(2) + "\n";
    return out;
}

}  // namespace nnwave
