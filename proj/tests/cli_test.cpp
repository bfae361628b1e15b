#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "nnwave/csv.hpp"
#include "nnwave/study.hpp"

using namespace nnwave;
namespace fs = std::filesystem;

namespace {

struct RunResult {
    int exit_code = -1;
    std::string stdout_text;
};

// Runs the real CLI binary; stdout captured, stderr passed through.
RunResult run_cli(const std::string& args) {
    const fs::path out = fs::temp_directory_path() / "nnwave_cli_stdout.txt";
    const std::string cmd = std::string(NNWAVE_CLI_PATH) + " " + args + " > " + out.string();
    const int rc = std::system(cmd.c_str());
    RunResult r;
    r.exit_code = WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
    if (fs::exists(out)) r.stdout_text = csv::read_file(out);
    return r;
}

fs::path fresh_dir(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / name;
    fs::remove_all(dir);
    return dir;
}

std::string smoke_args(const fs::path& dir) {
    // 4 points, 8 storms (4 core), tiny training budget
    return "--set out_dir=" + dir.string() +
           " --set gen.points=4 --set gen.storms=8 --set gen.core_storms=4"
           " --set train.max_epochs=3 --set train.steps_per_epoch=4 --set train.batch_size=32"
           " --set seeds=[7]";
}

std::map<std::string, std::string> file_digests(const fs::path& dir) {
    std::map<std::string, std::string> digests;
    for (const auto& entry : fs::recursive_directory_iterator(dir))
        if (entry.is_regular_file())
            digests[fs::relative(entry.path(), dir).string()] = csv::read_file(entry.path());
    return digests;
}

}  // namespace

TEST_CASE("full smoke pipeline end to end") {
    const fs::path dir = fresh_dir("nnwave_cli_smoke");
    const std::string base = smoke_args(dir);

    RunResult gen = run_cli("gen " + base);
    REQUIRE(gen.exit_code == 0);
    CHECK(gen.stdout_text.find("status=ok cmd=gen") != std::string::npos);
    CHECK(gen.stdout_text.find("landscapes=11") != std::string::npos);
    CHECK(gen.stdout_text.find("storms=8") != std::string::npos);
    CHECK(fs::exists(dir / "storms.csv"));
    CHECK(fs::exists(dir / "core_storms.txt"));
    CHECK(fs::exists(dir / "landscape_Higher_2070.csv"));
    CHECK(fs::exists(dir / "landscape_Higher_2070.json"));

    // rerun without --force refuses and leaves files untouched
    RunResult again = run_cli("gen " + base);
    CHECK(again.exit_code == 4);

    RunResult sim = run_cli("simulate " + base);
    REQUIRE(sim.exit_code == 0);
    CHECK(sim.stdout_text.find("status=ok cmd=simulate") != std::string::npos);
    CHECK(fs::exists(dir / "sims_Baseline_2020.csv"));
    CHECK(fs::exists(dir / "sims_Higher_2070.csv"));

    RunResult train = run_cli("train " + base);
    REQUIRE(train.exit_code == 0);
    CHECK(train.stdout_text.find("status=ok cmd=train") != std::string::npos);
    // 10 folds x 4 variants x 1 seed
    CHECK(train.stdout_text.find("cells=40") != std::string::npos);
    CHECK(train.stdout_text.find("ok=40") != std::string::npos);
    int pred_files = 0, model_files = 0;
    for (const auto& e : fs::directory_iterator(dir)) {
        const std::string name = e.path().filename().string();
        if (name.rfind("predictions_", 0) == 0) ++pred_files;
        if (name.rfind("model_", 0) == 0) ++model_files;
    }
    CHECK(pred_files == 40);
    CHECK(model_files == 40);

    RunResult hazard = run_cli("hazard " + base);
    REQUIRE(hazard.exit_code == 0);
    CHECK(fs::exists(dir / "hazard_oracle_Lower_2030.csv"));
    CHECK(fs::exists(dir / "hazard_M1_s7_Lower_2030.csv"));

    RunResult report = run_cli("report " + base);
    REQUIRE(report.exit_code == 0);
    CHECK(fs::exists(dir / "report_table1.csv"));
    CHECK(fs::exists(dir / "report_table2.csv"));
    CHECK(fs::exists(dir / "report_fig1.csv"));
    CHECK(fs::exists(dir / "report_fig2.csv"));
    CHECK(fs::exists(dir / "report_fig3_fig4.csv"));
    CHECK(fs::exists(dir / "study_metrics.json"));

    // table2: one row per (variant, landscape) plus header
    const auto t2 = csv::lines_of(csv::read_file(dir / "report_table2.csv"));
    CHECK(t2.size() == 1 + 4 * 10);

    // predict with a trained model document (plus the dataset debug export)
    RunResult predict = run_cli("predict " + base +
                                " --model " + (dir / "model_M1_Lower_2030_7.json").string() +
                                " --scenario Lower --year 2030 --dump-features " +
                                (dir / "dataset.csv").string());
    REQUIRE(predict.exit_code == 0);
    CHECK(fs::exists(dir / "predict_M1_Lower_2030.csv"));
    CHECK(fs::exists(dir / "dataset.csv"));
    CHECK(csv::read_file(dir / "dataset.csv").rfind("scenario,year,storm_id,point_id,heading", 0) ==
          0);

    // M3 predict works too (needs sims for the landscape)
    RunResult predict3 = run_cli("predict " + base +
                                 " --model " + (dir / "model_M3_Lower_2030_7.json").string() +
                                 " --scenario Lower --year 2030");
    REQUIRE(predict3.exit_code == 0);

    fs::remove_all(dir);
}

TEST_CASE("pipeline DAG is enforced with exit code 2") {
    const fs::path dir = fresh_dir("nnwave_cli_dag");
    const std::string base = smoke_args(dir);

    // simulate before gen
    RunResult sim = run_cli("simulate " + base);
    CHECK(sim.exit_code == 2);
    // train before simulate
    REQUIRE(run_cli("gen " + base).exit_code == 0);
    RunResult train = run_cli("train " + base);
    CHECK(train.exit_code == 2);
    // hazard before train
    REQUIRE(run_cli("simulate " + base).exit_code == 0);
    RunResult hazard = run_cli("hazard " + base);
    CHECK(hazard.exit_code == 2);
    // report before hazard
    RunResult report = run_cli("report " + base);
    CHECK(report.exit_code == 2);

    fs::remove_all(dir);
}

TEST_CASE("usage and schema errors map to their exit codes") {
    RunResult usage = run_cli("no-such-command");
    CHECK(usage.exit_code == 1);

    const fs::path dir = fresh_dir("nnwave_cli_schema");
    const std::string base = smoke_args(dir);
    REQUIRE(run_cli("gen " + base).exit_code == 0);
    REQUIRE(run_cli("simulate " + base).exit_code == 0);
    REQUIRE(run_cli("train " + base).exit_code == 0);

    // corrupt a model document's schema
    const fs::path model = dir / "model_M1_Lower_2030_7.json";
    std::string text = csv::read_file(model);
    const auto pos = text.find("\"input_dim\":13");
    REQUIRE(pos != std::string::npos);
    text.replace(pos, 14, "\"input_dim\":12");
    {
        std::ofstream out(model);
        out << text;
    }
    RunResult predict = run_cli("predict " + base + " --model " + model.string() +
                                " --scenario Lower --year 2030");
    CHECK(predict.exit_code == 2);

    // unknown config key
    RunResult bad = run_cli("gen --set no.such.key=1");
    CHECK(bad.exit_code == 2);

    fs::remove_all(dir);
}

TEST_CASE("NNWAVE_OUTPUT_ROOT provides the default output root") {
    const fs::path root = fresh_dir("nnwave_cli_envroot");
    const std::string cmd = "NNWAVE_OUTPUT_ROOT=" + root.string() + " " +
                            std::string(NNWAVE_CLI_PATH) +
                            " gen --points 4 --storms 8 --core-storms 4 > /dev/null";
    REQUIRE(std::system(cmd.c_str()) == 0);
    CHECK(fs::exists(root / "study" / "storms.csv"));
    fs::remove_all(root);
}

TEST_CASE("gen --print-config shows every default") {
    RunResult r = run_cli("gen --print-config");
    REQUIRE(r.exit_code == 0);
    for (const char* key :
         {"\"points\": 576", "\"storms\": 645", "\"core_storms\": 90", "\"batch_size\": 256",
          "\"lr_initial\": 0.01", "\"lr_factor\": 0.75", "\"lr_floor\": 1e-05",
          "\"alpha\": 0.05", "\"total_rate\": 0.35", "\"gamma\": 0.78",
          "\"profile\": \"small\"", "\"k_s\": 0.012"})
        CHECK(r.stdout_text.find(key) != std::string::npos);
    // overrides land in the printed config
    RunResult rr = run_cli("gen --print-config --set train.max_epochs=55");
    CHECK(rr.stdout_text.find("\"max_epochs\": 55") != std::string::npos);
}

TEST_CASE("rerunning the smoke pipeline reproduces every file byte-identically") {
    const fs::path dir = fresh_dir("nnwave_cli_idem");
    const std::string base = smoke_args(dir);
    for (const char* step : {"gen", "simulate", "train", "hazard", "report"})
        REQUIRE(run_cli(std::string(step) + " " + base + " --force").exit_code == 0);
    const auto first = file_digests(dir);

    for (const char* step : {"gen", "simulate", "train", "hazard", "report"})
        REQUIRE(run_cli(std::string(step) + " " + base + " --force --jobs 1").exit_code == 0);
    const auto second = file_digests(dir);

    REQUIRE(first.size() == second.size());
    for (const auto& [name, content] : first) {
        REQUIRE(second.count(name));
        CHECK_MESSAGE(second.at(name) == content, "file differs: ", name);
    }
    fs::remove_all(dir);
}
