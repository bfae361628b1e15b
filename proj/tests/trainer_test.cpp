#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <set>

#include "nnwave/gen.hpp"
#include "nnwave/trainer.hpp"

using namespace nnwave;
namespace fs = std::filesystem;

namespace {

// Small study built through the real generator machinery: 16 points,
// 24 storms (8 core), 11 landscapes.
struct SmallStudy {
    Catalog catalog;
    std::vector<Landscape> landscapes;
    SimulationTable table;

    explicit SmallStudy(int storms = 24, int core = 8, int points = 16) {
        Catalog full;
        for (int i = 1; i <= storms; ++i) {
            StormRecord s;
            s.storm_id = i;
            s.heading = -60.0 + 5.0 * i;
            s.v_f = 5.0 + (i % 7);
            s.r_max = 10.0 + (i % 9) * 4.0;
            s.landfall_lon = -93.5 + 0.25 * (i % 16);
            s.c_p = 870.0 + (i % 8) * 18.0;
            full.storms.push_back(s);
        }
        const std::set<int> core_ids = select_core_storms(full, core);
        for (auto& s : full.storms) s.is_core = core_ids.count(s.storm_id) > 0;
        catalog = full;
        landscapes = generate_landscapes(points);
        OracleParams params;
        table = generate_simulations(catalog, landscapes, params,
                                     default_subset_rule(catalog, "Baseline"));
    }
};

TrainConfig fast_config() {
    TrainConfig cfg;
    cfg.profile = "small";
    cfg.batch_size = 64;
    cfg.max_epochs = 4;
    cfg.steps_per_epoch = 6;
    cfg.early_stop_patience = 4;
    return cfg;
}

}  // namespace

TEST_CASE("make_folds reproduces the LOOCV design") {
    SmallStudy study;
    const auto folds = make_folds(study.landscapes, study.catalog);
    REQUIRE(folds.size() == 10);

    std::set<LandscapeKey> held;
    for (const Fold& f : folds) {
        held.insert(f.held_out);
        // the baseline is in every training set
        CHECK(std::count(f.train_landscapes.begin(), f.train_landscapes.end(),
                         LandscapeKey{"Baseline", 2020}) == 1);
        CHECK(f.train_landscapes.size() == 10);  // baseline + 9 other futures

        // test rows: exactly the core storms on the held-out landscape
        std::set<int> test_storms;
        for (const auto& k : f.test_rows) {
            CHECK(k.landscape == f.held_out);
            test_storms.insert(k.storm_id);
        }
        CHECK(test_storms.size() == 8);
        for (int id : test_storms) CHECK(study.catalog.by_id(id).is_core);
        CHECK(f.test_rows.size() == 8 * 16);

        // storm-landscape pairs in training: 24 on baseline + 9 x 8
        std::set<std::pair<std::string, int>> pairs;
        for (const auto& k : f.train_rows) {
            pairs.insert({k.landscape.label(), k.storm_id});
            CHECK(k.landscape != f.held_out);
        }
        CHECK(pairs.size() == 24 + 9 * 8);

        // train and test keys are disjoint
        std::set<RowKey> train_set(f.train_rows.begin(), f.train_rows.end());
        for (const auto& k : f.test_rows) CHECK_FALSE(train_set.count(k));
    }
    CHECK(held.size() == 10);

    SUBCASE("one future landscape gives one fold") {
        std::vector<Landscape> two = {study.landscapes[0]};  // baseline is first
        REQUIRE(two[0].scenario == "Baseline");
        two.push_back(study.landscapes[1]);
        CHECK(make_folds(two, study.catalog).size() == 1);
    }
    SUBCASE("no future landscapes gives an empty fold list") {
        std::vector<Landscape> one = {study.landscapes[0]};
        CHECK(make_folds(one, study.catalog).empty());
    }
    SUBCASE("missing baseline is a configuration error") {
        std::vector<Landscape> no_base(study.landscapes.begin() + 1, study.landscapes.end());
        CHECK_THROWS_AS(make_folds(no_base, study.catalog), ConfigError);
    }
}

TEST_CASE("validation split is deterministic, seed-dependent, and ~10%") {
    SmallStudy study;
    const auto folds = make_folds(study.landscapes, study.catalog);
    const Fold& f = folds[0];
    int in_val = 0;
    for (const auto& k : f.train_rows) {
        const bool v1 = is_validation_row(k, 42, 10);
        CHECK(v1 == is_validation_row(k, 42, 10));
        in_val += v1 ? 1 : 0;
    }
    const double frac = static_cast<double>(in_val) / f.train_rows.size();
    CHECK(frac > 0.04);
    CHECK(frac < 0.20);
    // a different seed produces a different split
    int moved = 0;
    for (const auto& k : f.train_rows)
        if (is_validation_row(k, 42, 10) != is_validation_row(k, 43, 10)) ++moved;
    CHECK(moved > 0);
}

TEST_CASE("train_variant: determinism, feature pass-through, and variants") {
    SmallStudy study;
    const auto folds = make_folds(study.landscapes, study.catalog);
    const FoldData data = make_fold_data(folds[0], study.table, study.catalog, study.landscapes);
    const TrainConfig cfg = fast_config();

    SUBCASE("M1 twice with the same seed is bit-identical") {
        TrainResult a = train_variant(Variant::M1, data, study.table, cfg, 7);
        TrainResult b = train_variant(Variant::M1, data, study.table, cfg, 7);
        REQUIRE(a.predictions.hs.size() == b.predictions.hs.size());
        CHECK(a.predictions.hs == b.predictions.hs);
        TrainResult c = train_variant(Variant::M1, data, study.table, cfg, 8);
        CHECK(a.predictions.hs != c.predictions.hs);
    }

    SUBCASE("M3 exists and sees the simulated surge; M4 predicts both columns") {
        TrainResult m3 = train_variant(Variant::M3, data, study.table, cfg, 7);
        CHECK(m3.predictions.hs.size() == static_cast<Eigen::Index>(data.fold.test_rows.size()));
        CHECK(m3.model.schema.input_dim == 14);
        CHECK(m3.predictions.surge.size() == 0);

        TrainResult m4 = train_variant(Variant::M4, data, study.table, cfg, 7);
        CHECK(m4.model.schema.output_dim == 2);
        CHECK(m4.predictions.surge.size() == m4.predictions.hs.size());
    }

    SUBCASE("M2 trains a surge surrogate within the fold and embeds it") {
        TrainResult m2 = train_variant(Variant::M2, data, study.table, cfg, 7);
        REQUIRE(m2.model.surge_model != nullptr);
        CHECK(m2.model.surge_model->schema.input_dim == 13);
        CHECK(m2.model.schema.input_dim == 14);
        CHECK(m2.predictions.hs.allFinite());
    }

    SUBCASE("no leakage: removing held-out records leaves the trained model bit-identical") {
        SimulationTable censored = study.table;
        censored.remove_landscape(data.fold.held_out);
        const FoldData data2 =
            make_fold_data(folds[0], censored, study.catalog, study.landscapes);
        for (Variant v : {Variant::M1, Variant::M2, Variant::M4}) {
            TrainResult full = train_variant(v, data, study.table, cfg, 7);
            TrainResult cens = train_variant(v, data2, censored, cfg, 7);
            REQUIRE(full.predictions.hs.size() == cens.predictions.hs.size());
            CHECK(full.predictions.hs == cens.predictions.hs);  // bit-identical
            for (size_t li = 0; li < full.model.weights.layers.size(); ++li) {
                const auto& wa = full.model.weights.layers[li].weight;
                const auto& wb = cens.model.weights.layers[li].weight;
                if (!wa.empty()) CHECK(wa.value == wb.value);
            }
        }
        // M3 legitimately needs the held-out surge as an input feature
        CHECK_THROWS_AS(train_variant(Variant::M3, data2, censored, cfg, 7), ValidationError);
    }

    SUBCASE("training history drives the scheduler and is recorded") {
        TrainResult r = train_variant(Variant::M1, data, study.table, cfg, 7);
        REQUIRE(!r.model.training_history.empty());
        CHECK(r.model.training_history.front().lr == cfg.lr_initial);
        for (const auto& e : r.model.training_history) {
            CHECK(std::isfinite(e.train_loss));
            CHECK(std::isfinite(e.val_loss));
        }
    }
}

TEST_CASE("training with an absurd learning rate diverges with context") {
    SmallStudy study;
    const auto folds = make_folds(study.landscapes, study.catalog);
    const FoldData data = make_fold_data(folds[0], study.table, study.catalog, study.landscapes);
    TrainConfig cfg = fast_config();
    cfg.lr_initial = 1e280;
    try {
        train_variant(Variant::M1, data, study.table, cfg, 7);
        FAIL("expected TrainingDivergedError");
    } catch (const TrainingDivergedError& e) {
        CHECK(e.epoch >= 1);
        CHECK(e.lr == 1e280);
    }
}

TEST_CASE("run_study: persistence, resumability, divergence isolation") {
    SmallStudy study(12, 4, 16);
    const fs::path dir = fs::temp_directory_path() / "nnwave_trainer_test";
    fs::remove_all(dir);
    TrainConfig cfg = fast_config();
    const std::vector<Variant> variants = {Variant::M1, Variant::M4};
    const std::vector<std::uint64_t> seeds = {7};

    StudySummary s1 = run_study(study.landscapes, study.catalog, study.table, variants, cfg,
                                seeds, dir.string(), 2, false);
    CHECK(s1.cells.size() == 10 * 2 * 1);
    for (const auto& [key, cell] : s1.cells) CHECK(cell.status == "ok");
    CHECK(fs::exists(dir / "study_summary.json"));
    CHECK(fs::exists(dir / predictions_filename(Variant::M1, {"Lower", 2030}, 7)));
    CHECK(fs::exists(dir / model_filename(Variant::M1, {"Lower", 2030}, 7)));

    // predictions round-trip through their CSV exactly
    const auto p = load_predictions_file(
        (dir / predictions_filename(Variant::M1, {"Lower", 2030}, 7)).string(), Variant::M1,
        {"Lower", 2030}, 7);
    CHECK(p.keys.size() == 4 * 16);
    CHECK(p.hs.allFinite());

    // resumability: delete one cell's output; only that cell recomputes
    const fs::path victim = dir / predictions_filename(Variant::M4, {"Higher", 2050}, 7);
    const auto before_m1 = fs::last_write_time(dir / predictions_filename(Variant::M1, {"Lower", 2030}, 7));
    fs::remove(victim);
    StudySummary s2 = run_study(study.landscapes, study.catalog, study.table, variants, cfg,
                                seeds, dir.string(), 2, false);
    CHECK(fs::exists(victim));
    CHECK(fs::last_write_time(dir / predictions_filename(Variant::M1, {"Lower", 2030}, 7)) ==
          before_m1);
    CHECK(s2.cells.size() == s1.cells.size());

    fs::remove_all(dir);
}

TEST_CASE("run_study marks diverged cells and continues") {
    SmallStudy study(12, 4, 16);
    const fs::path dir = fs::temp_directory_path() / "nnwave_trainer_div";
    fs::remove_all(dir);
    TrainConfig cfg = fast_config();
    cfg.lr_initial = 1e280;  // every cell diverges
    StudySummary s = run_study(study.landscapes, study.catalog, study.table, {Variant::M1}, cfg,
                               {7}, dir.string(), 1, false);
    CHECK(s.cells.size() == 10);
    for (const auto& [key, cell] : s.cells) {
        CHECK(cell.status == "diverged");
        CHECK(cell.diverged_epoch >= 1);
    }
    fs::remove_all(dir);
}
