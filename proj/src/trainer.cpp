#include "nnwave/trainer.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <json.hpp>
#include <mutex>
#include <thread>

#include "nnwave/csv.hpp"
#include "nnwave/hash.hpp"

namespace nnwave {

namespace fs = std::filesystem;
using nlohmann::json;

std::vector<Fold> make_folds(const std::vector<Landscape>& landscapes, const Catalog& catalog,
                             const std::string& baseline_scenario) {
    const Landscape* baseline = nullptr;
    std::vector<const Landscape*> future;
    for (const auto& ls : landscapes) {
        if (ls.scenario == baseline_scenario) {
            if (baseline)
                throw ConfigError("more than one baseline landscape ('" + baseline_scenario + "')");
            baseline = &ls;
        } else {
            future.push_back(&ls);
        }
    }
    if (!baseline) throw ConfigError("no baseline landscape ('" + baseline_scenario + "') found");
    std::sort(future.begin(), future.end(),
              [](const Landscape* a, const Landscape* b) { return a->key() < b->key(); });

    std::vector<int> all_ids, core_ids;
    for (const auto& s : catalog.storms) {
        all_ids.push_back(s.storm_id);
        if (s.is_core) core_ids.push_back(s.storm_id);
    }
    std::sort(all_ids.begin(), all_ids.end());
    std::sort(core_ids.begin(), core_ids.end());
    if (core_ids.empty() && !future.empty())
        throw ConfigError("catalog has no core storms to test future landscapes with");

    auto rows_for = [&](const Landscape& ls, const std::vector<int>& storms,
                        std::vector<RowKey>& out) {
        for (int sid : storms)
            for (const auto& pt : ls.points) out.push_back({ls.key(), sid, pt.point_id});
    };

    std::vector<Fold> folds;
    for (const Landscape* held : future) {
        Fold f;
        f.held_out = held->key();
        f.train_landscapes.push_back(baseline->key());
        rows_for(*baseline, all_ids, f.train_rows);
        for (const Landscape* other : future) {
            if (other == held) continue;
            f.train_landscapes.push_back(other->key());
            rows_for(*other, core_ids, f.train_rows);
        }
        rows_for(*held, core_ids, f.test_rows);
        std::sort(f.train_rows.begin(), f.train_rows.end());
        std::sort(f.test_rows.begin(), f.test_rows.end());
        std::sort(f.train_landscapes.begin(), f.train_landscapes.end());
        folds.push_back(std::move(f));
    }
    return folds;
}

FoldData make_fold_data(const Fold& fold, const SimulationTable& table, const Catalog& catalog,
                        const std::vector<Landscape>& landscapes) {
    FoldData data;
    data.fold = fold;
    const FeatureSchema m4 = make_schema(Variant::M4);  // 13 features, (surge, hs) targets
    data.train = assemble_rows(fold.train_rows, catalog, landscapes, m4, SurgeSource::none(),
                               &table);
    data.train_surge = data.train.targets.col(0);
    data.test = assemble_rows(fold.test_rows, catalog, landscapes, m4, SurgeSource::none(),
                              nullptr);
    return data;
}

std::uint64_t cell_seed(std::uint64_t base_seed, Variant variant, const LandscapeKey& fold_key) {
    Fnv1a h;
    h.str(variant_name(variant)).str(fold_key.scenario).i64(fold_key.year);
    return base_seed ^ h.get();
}

bool is_validation_row(const RowKey& key, std::uint64_t seed, int modulus) {
    Fnv1a h;
    h.str(key.landscape.scenario).i64(key.landscape.year).i64(key.storm_id).i64(key.point_id);
    return ((h.get() ^ splitmix64(seed)) % static_cast<std::uint64_t>(modulus)) == 0;
}

namespace {

struct SingleResult {
    ModelDocument doc;
    Eigen::MatrixXd test_pred;  // meters
};

Eigen::MatrixXd predict_scaled(const net::NetworkSpec& spec, const net::Weights<double>& w,
                               const Eigen::MatrixXd& x) {
    const Eigen::Index chunk = 8192;
    Eigen::MatrixXd out(x.rows(), spec.output_dim);
    for (Eigen::Index r = 0; r < x.rows(); r += chunk) {
        const Eigen::Index n = std::min(chunk, x.rows() - r);
        Eigen::MatrixXd block = x.middleRows(r, n);
        out.middleRows(r, n) = net::predict(spec, w, block);
    }
    return out;
}

// Core fit: z-scored inputs/targets, mini-batch Adam, reduce-on-plateau
// schedule driven by the key-hash validation split, early stopping.
SingleResult train_single(const FeatureSchema& schema, const TrainConfig& cfg,
                          const Eigen::MatrixXd& x_m, const Eigen::MatrixXd& y_m,
                          const std::vector<RowKey>& keys, const Eigen::MatrixXd& x_test_m,
                          std::uint64_t seed) {
    if (x_m.rows() != y_m.rows() || x_m.rows() != static_cast<Eigen::Index>(keys.size()))
        throw ConfigError("training matrices and keys disagree in length");
    if (x_m.cols() != schema.input_dim || y_m.cols() != schema.output_dim)
        throw ConfigError("training matrices do not match the schema");

    Dataset train_ds;
    train_ds.inputs = x_m;
    train_ds.targets = y_m;
    train_ds.keys = keys;
    train_ds.schema = schema;
    const Scaler scaler = fit_scaler(train_ds);
    const Dataset scaled = apply(scaler, train_ds);

    std::vector<Eigen::Index> train_idx, val_idx;
    for (Eigen::Index i = 0; i < scaled.rows(); ++i) {
        if (is_validation_row(keys[i], seed, cfg.val_modulus))
            val_idx.push_back(i);
        else
            train_idx.push_back(i);
    }
    if (val_idx.empty()) {
        // degenerate smoke-scale split: fall back to a deterministic stride
        std::vector<Eigen::Index> rest;
        for (Eigen::Index i = 0; i < scaled.rows(); ++i)
            ((i % cfg.val_modulus) == 0 ? val_idx : rest).push_back(i);
        train_idx.swap(rest);
    }
    if (train_idx.empty()) throw ConfigError("no training rows left after the validation split");
    if (cfg.val_row_cap > 0 && static_cast<int>(val_idx.size()) > cfg.val_row_cap) {
        const size_t stride = (val_idx.size() + cfg.val_row_cap - 1) / cfg.val_row_cap;
        std::vector<Eigen::Index> thin;
        for (size_t i = 0; i < val_idx.size(); i += stride) thin.push_back(val_idx[i]);
        val_idx.swap(thin);
    }

    Eigen::MatrixXd val_x(val_idx.size(), schema.input_dim);
    Eigen::MatrixXd val_y(val_idx.size(), schema.output_dim);
    for (size_t i = 0; i < val_idx.size(); ++i) {
        val_x.row(static_cast<Eigen::Index>(i)) = scaled.inputs.row(val_idx[i]);
        val_y.row(static_cast<Eigen::Index>(i)) = scaled.targets.row(val_idx[i]);
    }

    net::NetworkSpec spec = net::make_profile(cfg.profile, schema.input_dim, schema.output_dim);
    auto weights = net::build<double>(spec, seed);
    std::mt19937_64 rng(splitmix64(seed));

    net::LrScheduler sched;
    sched.initial = cfg.lr_initial;
    sched.lr = cfg.lr_initial;
    sched.factor = cfg.lr_factor;
    sched.floor = cfg.lr_floor;
    sched.patience = cfg.lr_patience;

    std::vector<EpochRecord> history;
    double best_val = std::numeric_limits<double>::infinity();
    int epochs_since_best = 0;

    const Eigen::Index n_train = static_cast<Eigen::Index>(train_idx.size());
    const Eigen::Index batch = std::max(1, cfg.batch_size);
    Eigen::Index steps_full = (n_train + batch - 1) / batch;
    for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
        // deterministic Fisher-Yates; std::shuffle ordering is
        // implementation-defined, this is not
        for (Eigen::Index i = n_train - 1; i > 0; --i) {
            const Eigen::Index j =
                static_cast<Eigen::Index>(rng() % static_cast<std::uint64_t>(i + 1));
            std::swap(train_idx[i], train_idx[j]);
        }
        Eigen::Index steps = steps_full;
        if (cfg.steps_per_epoch > 0) steps = std::min<Eigen::Index>(steps, cfg.steps_per_epoch);

        double loss_sum = 0;
        for (Eigen::Index s = 0; s < steps; ++s) {
            const Eigen::Index lo = s * batch;
            const Eigen::Index n = std::min(batch, n_train - lo);
            Eigen::MatrixXd bx(n, schema.input_dim), by(n, schema.output_dim);
            for (Eigen::Index r = 0; r < n; ++r) {
                bx.row(r) = scaled.inputs.row(train_idx[lo + r]);
                by.row(r) = scaled.targets.row(train_idx[lo + r]);
            }
            net::ForwardOptions opt;
            opt.stats = net::StatsMode::batch;
            opt.update_running = true;
            opt.rng = &rng;
            net::Gradients<double> grads;
            double loss;
            try {
                loss = net::loss_and_grads(spec, weights, bx, by, opt, grads);
                if (!std::isfinite(loss)) throw NumericError("non-finite training loss");
                net::adam_step(weights, grads, sched.lr);
            } catch (const NumericError& e) {
                throw TrainingDivergedError(
                    "training diverged at epoch " + std::to_string(epoch) + ": " + e.what(),
                    epoch, sched.lr);
            }
            loss_sum += loss;
        }

        const double val_loss =
            val_x.rows() ? net::mse_loss(predict_scaled(spec, weights, val_x), val_y)
                         : loss_sum / static_cast<double>(steps);
        if (!std::isfinite(val_loss))
            throw TrainingDivergedError("validation loss diverged at epoch " +
                                        std::to_string(epoch), epoch, sched.lr);
        history.push_back({epoch, loss_sum / static_cast<double>(steps), val_loss, sched.lr});
        sched.step(val_loss);

        if (val_loss < best_val) {
            best_val = val_loss;
            epochs_since_best = 0;
        } else if (++epochs_since_best >= cfg.early_stop_patience) {
            break;
        }
    }

    SingleResult result;
    result.doc.spec = std::move(spec);
    result.doc.weights = std::move(weights);
    result.doc.schema = schema;
    result.doc.scaler = scaler;
    result.doc.rng_seed = seed;
    result.doc.training_history = std::move(history);
    if (x_test_m.rows() > 0) result.test_pred = predict_with_model(result.doc, x_test_m);
    return result;
}

Eigen::MatrixXd with_surge_column(const Eigen::MatrixXd& base, const Eigen::VectorXd& surge) {
    Eigen::MatrixXd out(base.rows(), base.cols() + 1);
    out << base, surge;
    return out;
}

}  // namespace

Eigen::MatrixXd predict_with_model(const ModelDocument& doc, const Eigen::MatrixXd& inputs_meters) {
    if (!doc.scaler.fitted) throw ConfigError("model scaler has not been fitted");
    if (inputs_meters.cols() != doc.schema.input_dim)
        throw ValidationError("input width " + std::to_string(inputs_meters.cols()) +
                              " does not match the model schema (" +
                              std::to_string(doc.schema.input_dim) + ")");
    Eigen::MatrixXd scaled =
        (inputs_meters.rowwise() - doc.scaler.input_mean.transpose()).array().rowwise() /
        doc.scaler.input_std.transpose().array();
    Eigen::MatrixXd pred = predict_scaled(doc.spec, doc.weights, scaled);
    return invert_targets(doc.scaler, pred);
}

TrainResult train_variant(Variant variant, const FoldData& data, const SimulationTable& table,
                          const TrainConfig& config, std::uint64_t seed) {
    const Eigen::Index n_train = data.train.rows();
    if (n_train == 0) throw ConfigError("fold has no training rows");

    TrainResult result;
    result.predictions.variant = variant;
    result.predictions.landscape = data.fold.held_out;
    result.predictions.seed = seed;
    result.predictions.keys = data.fold.test_rows;

    const Eigen::VectorXd train_hs = data.train.targets.col(1);
    SingleResult fit;

    switch (variant) {
        case Variant::M1: {
            fit = train_single(make_schema(Variant::M1), config, data.train.inputs, train_hs,
                               data.train.keys, data.test.inputs, seed);
            result.predictions.hs = fit.test_pred.col(0);
            break;
        }
        case Variant::M3: {
            Eigen::VectorXd test_surge(data.test.rows());
            for (Eigen::Index i = 0; i < data.test.rows(); ++i) {
                const RowKey& k = data.test.keys[i];
                test_surge(i) = table.at(k.landscape, k.storm_id, k.point_id).surge;
            }
            fit = train_single(make_schema(Variant::M3), config,
                               with_surge_column(data.train.inputs, data.train_surge), train_hs,
                               data.train.keys, with_surge_column(data.test.inputs, test_surge),
                               seed);
            result.predictions.hs = fit.test_pred.col(0);
            break;
        }
        case Variant::M2: {
            // Stage 1: surge surrogate on the fold's training rows.
            Fnv1a h;
            h.str("surge-surrogate");
            const std::uint64_t surge_seed = splitmix64(seed ^ h.get());
            SingleResult surge_fit = train_single(
                make_schema(Variant::M1), config, data.train.inputs, data.train.targets.col(0),
                data.train.keys, Eigen::MatrixXd(0, data.train.inputs.cols()), surge_seed);
            // Stage 2: the wave model sees predicted surge everywhere, so
            // train and test feature distributions match.
            Eigen::VectorXd surge_train =
                predict_with_model(surge_fit.doc, data.train.inputs).col(0);
            Eigen::VectorXd surge_test = predict_with_model(surge_fit.doc, data.test.inputs).col(0);
            fit = train_single(make_schema(Variant::M2), config,
                               with_surge_column(data.train.inputs, surge_train), train_hs,
                               data.train.keys, with_surge_column(data.test.inputs, surge_test),
                               seed);
            fit.doc.surge_model = std::make_shared<ModelDocument>(std::move(surge_fit.doc));
            result.predictions.hs = fit.test_pred.col(0);
            break;
        }
        case Variant::M4: {
            fit = train_single(make_schema(Variant::M4), config, data.train.inputs,
                               data.train.targets, data.train.keys, data.test.inputs, seed);
            result.predictions.surge = fit.test_pred.col(0);
            result.predictions.hs = fit.test_pred.col(1);
            break;
        }
    }
    result.model = std::move(fit.doc);
    return result;
}

std::string cell_key(Variant v, const LandscapeKey& ls, std::uint64_t seed) {
    return variant_name(v) + "/" + ls.scenario + "/" + std::to_string(ls.year) + "/" +
           std::to_string(seed);
}

std::string predictions_filename(Variant v, const LandscapeKey& ls, std::uint64_t seed) {
    return "predictions_" + variant_name(v) + "_" + ls.scenario + "_" +
           std::to_string(ls.year) + "_" + std::to_string(seed) + ".csv";
}

std::string model_filename(Variant v, const LandscapeKey& ls, std::uint64_t seed) {
    return "model_" + variant_name(v) + "_" + ls.scenario + "_" + std::to_string(ls.year) + "_" +
           std::to_string(seed) + ".json";
}

namespace {

std::string format_predictions(const PredictionSet& p) {
    const bool with_surge = p.surge.size() > 0;
    std::string out = with_surge ? "storm_id,point_id,pred_hs_m,pred_surge_m\n"
                                 : "storm_id,point_id,pred_hs_m\n";
    for (size_t i = 0; i < p.keys.size(); ++i) {
        out += std::to_string(p.keys[i].storm_id) + "," + std::to_string(p.keys[i].point_id) +
               "," + csv::format_double(p.hs(static_cast<Eigen::Index>(i)));
        if (with_surge) out += "," + csv::format_double(p.surge(static_cast<Eigen::Index>(i)));
        out += "\n";
    }
    return out;
}

json outcome_to_json(const CellOutcome& o) {
    json j;
    j["status"] = o.status;
    j["epochs"] = o.epochs;
    j["final_train_loss"] = o.final_train_loss;
    j["final_val_loss"] = o.final_val_loss;
    j["lr_trace"] = o.lr_trace;
    j["surge_model_id"] = o.surge_model_id;
    j["diverged_epoch"] = o.diverged_epoch;
    j["diverged_lr"] = o.diverged_lr;
    return j;
}

CellOutcome outcome_from_json(const json& j) {
    CellOutcome o;
    o.status = j.at("status").get<std::string>();
    o.epochs = j.at("epochs").get<int>();
    o.final_train_loss = j.at("final_train_loss").get<double>();
    o.final_val_loss = j.at("final_val_loss").get<double>();
    o.lr_trace = j.at("lr_trace").get<std::vector<double>>();
    o.surge_model_id = j.at("surge_model_id").get<std::string>();
    o.diverged_epoch = j.at("diverged_epoch").get<int>();
    o.diverged_lr = j.at("diverged_lr").get<double>();
    return o;
}

}  // namespace

PredictionSet load_predictions_file(const std::string& path, Variant v, const LandscapeKey& ls,
                                    std::uint64_t seed) {
    PredictionSet p;
    p.variant = v;
    p.landscape = ls;
    p.seed = seed;
    const auto lines = csv::lines_of(csv::read_file(path));
    if (lines.empty()) throw ParseError(path + ": empty predictions file");
    const char sep = ',';
    const auto header = csv::split(lines[0], sep);
    const bool with_surge = header.size() == 4;
    if (!(header.size() == 3 || header.size() == 4) || header[0] != "storm_id" ||
        header[1] != "point_id" || header[2] != "pred_hs_m" ||
        (with_surge && header[3] != "pred_surge_m"))
        throw ParseError(path + ": unexpected predictions header");
    std::vector<double> hs, surge;
    for (size_t i = 1; i < lines.size(); ++i) {
        if (csv::trim(lines[i]).empty()) continue;
        const auto tok = csv::split(lines[i], sep);
        const int row = static_cast<int>(i) + 1;
        if (tok.size() != header.size())
            throw ParseError(path + ": row " + std::to_string(row) + " has wrong field count");
        RowKey k;
        k.landscape = ls;
        k.storm_id = static_cast<int>(csv::parse_int(tok[0], row, "storm_id"));
        k.point_id = static_cast<int>(csv::parse_int(tok[1], row, "point_id"));
        p.keys.push_back(k);
        hs.push_back(csv::parse_double(tok[2], row, "pred_hs_m"));
        if (with_surge) surge.push_back(csv::parse_double(tok[3], row, "pred_surge_m"));
    }
    p.hs = Eigen::Map<Eigen::VectorXd>(hs.data(), static_cast<Eigen::Index>(hs.size()));
    if (with_surge)
        p.surge =
            Eigen::Map<Eigen::VectorXd>(surge.data(), static_cast<Eigen::Index>(surge.size()));
    return p;
}

StudySummary run_study(const std::vector<Landscape>& landscapes, const Catalog& catalog,
                       const SimulationTable& table, const std::vector<Variant>& variants,
                       const TrainConfig& config, const std::vector<std::uint64_t>& seeds,
                       const std::string& out_dir, int jobs, bool force) {
    if (variants.empty()) throw ConfigError("no model variants requested");
    if (seeds.empty()) throw ConfigError("no seeds requested");
    fs::create_directories(out_dir);

    StudySummary summary;
    const fs::path summary_path = fs::path(out_dir) / "study_summary.json";
    if (!force && fs::exists(summary_path)) {
        try {
            json j = json::parse(csv::read_file(summary_path));
            for (const auto& [key, val] : j.at("cells").items())
                summary.cells[key] = outcome_from_json(val);
        } catch (const std::exception&) {
            // unreadable summary: recompute cell statuses from scratch
            summary.cells.clear();
        }
    }

    const std::vector<Fold> folds = make_folds(landscapes, catalog);
    struct CellTask {
        Variant variant;
        std::uint64_t seed;
    };

    for (const Fold& fold : folds) {
        std::vector<CellTask> pending;
        for (Variant v : variants) {
            for (std::uint64_t seed : seeds) {
                const fs::path pred_path =
                    fs::path(out_dir) / predictions_filename(v, fold.held_out, seed);
                const std::string key = cell_key(v, fold.held_out, seed);
                if (!force && fs::exists(pred_path)) {
                    if (!summary.cells.count(key)) {
                        CellOutcome o;
                        o.status = "cached";
                        summary.cells[key] = o;
                    }
                    continue;
                }
                pending.push_back({v, seed});
            }
        }
        if (pending.empty()) continue;

        const FoldData data = make_fold_data(fold, table, catalog, landscapes);
        std::mutex mu;
        std::atomic<size_t> next{0};
        std::exception_ptr first_error;

        auto worker = [&]() {
            while (true) {
                const size_t i = next.fetch_add(1);
                if (i >= pending.size()) return;
                const CellTask& task = pending[i];
                const std::string key = cell_key(task.variant, fold.held_out, task.seed);
                CellOutcome outcome;
                try {
                    TrainResult res =
                        train_variant(task.variant, data, table, config,
                                      cell_seed(task.seed, task.variant, fold.held_out));
                    res.model.rng_seed = task.seed;
                    if (res.model.surge_model) res.model.surge_model->rng_seed = task.seed;
                    csv::write_file_atomic(
                        fs::path(out_dir) /
                            predictions_filename(task.variant, fold.held_out, task.seed),
                        format_predictions(res.predictions));
                    save_model_file(res.model,
                                    (fs::path(out_dir) /
                                     model_filename(task.variant, fold.held_out, task.seed))
                                        .string());
                    outcome.status = "ok";
                    outcome.epochs = static_cast<int>(res.model.training_history.size());
                    if (!res.model.training_history.empty()) {
                        outcome.final_train_loss = res.model.training_history.back().train_loss;
                        outcome.final_val_loss = res.model.training_history.back().val_loss;
                        for (const auto& e : res.model.training_history)
                            outcome.lr_trace.push_back(e.lr);
                    }
                    if (res.model.surge_model)
                        outcome.surge_model_id = res.model.surge_model->model_id();
                } catch (const TrainingDivergedError& e) {
                    outcome.status = "diverged";
                    outcome.diverged_epoch = e.epoch;
                    outcome.diverged_lr = e.lr;
                } catch (...) {
                    std::lock_guard<std::mutex> lock(mu);
                    if (!first_error) first_error = std::current_exception();
                    return;
                }
                std::lock_guard<std::mutex> lock(mu);
                std::fputs(("cell " + key + ": " + outcome.status + "\n").c_str(), stderr);
                summary.cells[key] = std::move(outcome);
            }
        };

        const int n_threads = std::max(1, std::min<int>(jobs, static_cast<int>(pending.size())));
        std::vector<std::thread> threads;
        for (int t = 0; t < n_threads; ++t) threads.emplace_back(worker);
        for (auto& th : threads) th.join();
        if (first_error) std::rethrow_exception(first_error);
    }

    json j;
    j["cells"] = json::object();
    for (const auto& [key, outcome] : summary.cells) j["cells"][key] = outcome_to_json(outcome);
    csv::write_file_atomic(summary_path, j.dump(2) + "\n");
    return summary;
}

}  // namespace nnwave
