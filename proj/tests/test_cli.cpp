#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "labeltrust/io.hpp"
#include "test_util.hpp"

namespace fs = std::filesystem;

namespace {

const char* kCli = LABELTRUST_CLI_PATH;

struct TempDir {
    fs::path path;
    TempDir() {
        static std::atomic<int> counter{0};
        path = fs::temp_directory_path() /
               ("labeltrust_cli_" + std::to_string(::getpid()) + "_" +
                std::to_string(counter++));
        fs::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path, ec);
    }
};

int run_cli(const std::string& args) {
    const std::string command = std::string(kCli) + " " + args + " > /dev/null 2>&1";
    const int status = std::system(command.c_str());
    return WEXITSTATUS(status);
}

std::string slurp(const fs::path& path) {
    std::ifstream in(path);
    REQUIRE(in.good());
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

int count_lines(const std::string& text) {
    int lines = 0;
    for (char ch : text) lines += ch == '\n';
    return lines;
}

}  // namespace

TEST_CASE("synth writes a dataset and manifest") {
    TempDir dir;
    REQUIRE(run_cli("synth --synth two-moons --n 100 --minority-fraction 0.1 --seed 3 --out " +
                    dir.path.string()) == 0);
    REQUIRE(fs::exists(dir.path / "dataset.csv"));
    REQUIRE(fs::exists(dir.path / "manifest.json"));
    REQUIRE(count_lines(slurp(dir.path / "dataset.csv")) == 101);  // header + 100 rows
    const auto manifest = labeltrust::load_json((dir.path / "manifest.json").string());
    REQUIRE(manifest.at("command") == "synth");
    REQUIRE(manifest.at("config").at("n_written") == 100);
}

TEST_CASE("detect on synthetic moons emits one score per example") {
    TempDir dir;
    REQUIRE(run_cli("detect --synth two-moons --n 100 --minority-fraction 0.1 "
                    "--noise flips:5 --detector aum --addon isotonic --rff --rff-dim 64 "
                    "--epochs 10 --seed 5 --out " +
                    dir.path.string()) == 0);
    const std::string csv = slurp(dir.path / "scores.csv");
    REQUIRE(count_lines(csv) == 101);  // header + 100 scores
    REQUIRE(fs::exists(dir.path / "manifest.json"));
    REQUIRE(fs::exists(dir.path / "detection_quality.json"));
    const auto quality = labeltrust::load_json((dir.path / "detection_quality.json").string());
    REQUIRE(quality.at("mislabeled") == 10);
}

TEST_CASE("detect re-run with the same flags is byte-identical") {
    TempDir a, b;
    const std::string flags =
        "detect --synth blobs --n 120 --priors 0.8,0.2 --noise uniform:0.2 "
        "--detector cleanlab --addon sigmoid --epochs 5 --seed 11 --out ";
    REQUIRE(run_cli(flags + a.path.string()) == 0);
    REQUIRE(run_cli(flags + b.path.string()) == 0);
    REQUIRE(slurp(a.path / "scores.csv") == slurp(b.path / "scores.csv"));
}

TEST_CASE("calibration addon without a calibration source is a config error") {
    TempDir dir;
    TempDir data_dir;
    REQUIRE(run_cli("synth --synth blobs --n 60 --priors 0.5,0.5 --seed 2 --out " +
                    data_dir.path.string()) == 0);
    const int status = run_cli("detect --data " + (data_dir.path / "dataset.csv").string() +
                               " --label-column label --detector aum --addon sigmoid --out " +
                               dir.path.string());
    REQUIRE(status == 1);
}

TEST_CASE("unknown flags are rejected") {
    TempDir dir;
    REQUIRE(run_cli("synth --synth blobs --definitely-not-a-flag 3 --out " + dir.path.string()) !=
            0);
}

TEST_CASE("corrupt applies labeling rules from json") {
    TempDir data_dir, out_dir;
    REQUIRE(run_cli("synth --synth blobs --n 80 --priors 0.5,0.5 --seed 4 --out " +
                    data_dir.path.string()) == 0);
    const nlohmann::json rules = {
        {"rules",
         {{{"kind", "threshold"}, {"column", "f0"}, {"threshold", 0.0}, {"label", 0}},
          {{"kind", "threshold"}, {"column", "f1"}, {"threshold", 0.0}, {"label", 1}}}},
        {"fallback", "global-majority"}};
    labeltrust::save_json(rules, (data_dir.path / "rules.json").string());
    REQUIRE(run_cli("corrupt --data " + (data_dir.path / "dataset.csv").string() +
                    " --label-column label --true-label-column true_label --rules " +
                    (data_dir.path / "rules.json").string() + " --seed 9 --out " +
                    out_dir.path.string()) == 0);
    REQUIRE(fs::exists(out_dir.path / "corrupted.csv"));
    const auto manifest = labeltrust::load_json((out_dir.path / "manifest.json").string());
    REQUIRE(manifest.at("config").contains("noise_ratio"));
}

TEST_CASE("calibrate-eval reports the error before and after") {
    TempDir dir;
    REQUIRE(run_cli("calibrate-eval --synth blobs --n 400 --priors 0.7,0.3 "
                    "--noise uniform:0.2 --method isotonic --seed 6 --out " +
                    dir.path.string()) == 0);
    const auto report = labeltrust::load_json((dir.path / "calibration_report.json").string());
    REQUIRE(report.at("classwise_ece_before").is_number());
    REQUIRE(report.at("classwise_ece_after").is_number());
    REQUIRE(fs::exists(dir.path / "reliability.csv"));
}

TEST_CASE("pipeline command emits a result with a normalized score") {
    TempDir dir;
    REQUIRE(run_cli("pipeline --synth blobs --n 300 --priors 0.7,0.3 --noise uniform:0.25 "
                    "--detector small_loss --addon baseline --q 0.3 --epochs 8 --seed 8 --out " +
                    dir.path.string()) == 0);
    const auto result = labeltrust::load_json((dir.path / "pipeline_result.json").string());
    REQUIRE(result.at("status") == "ok");
    REQUIRE(result.at("test_log_loss").is_number());
    REQUIRE(result.at("normalized_score").is_number());
}

TEST_CASE("bench runs a tiny sweep and report re-renders the plots") {
    TempDir dir;
    const nlohmann::json config = {
        {"tasks",
         {{{"name", "tiny"},
           {"generator", "blobs"},
           {"n", 200},
           {"priors", {0.7, 0.3}},
           {"cluster_std", 1.2},
           {"center_radius", 2.0},
           {"noise", {{"kind", "uniform"}, {"rho", 0.25}}}}}},
        {"detectors", {"small_loss", "aum"}},
        {"addons", {"baseline", "isotonic"}},
        {"seeds", {1}},
        {"search", {{"n_samples", 2}}},
        {"detector_train", {{"epochs", 4}}},
        {"parallelism", 2}};
    labeltrust::save_json(config, (dir.path / "bench.json").string());
    REQUIRE(run_cli("bench --config " + (dir.path / "bench.json").string() + " --out " +
                    dir.path.string()) == 0);
    for (const char* name : {"trials.csv", "boxplot.csv", "summary.json", "wilcoxon.csv",
                             "minority_curves.csv", "normalized_scores.svg",
                             "baseline_vs_isotonic.svg"})
        REQUIRE(fs::exists(dir.path / name));

    // 2 detectors x 2 addons x 1 seed x (2 samples x 9 quantiles) trials + header.
    REQUIRE(count_lines(slurp(dir.path / "trials.csv")) == 1 + 2 * 2 * 2 * 9);

    const auto summary = labeltrust::load_json((dir.path / "summary.json").string());
    REQUIRE(summary.at("units").size() == 4);
    REQUIRE(summary.at("references").size() == 1);
    for (const auto& unit : summary.at("units"))
        REQUIRE(unit.at("status") == "ok");

    TempDir report_dir;
    REQUIRE(run_cli("report --in " + dir.path.string() + " --out " + report_dir.path.string()) ==
            0);
    REQUIRE(fs::exists(report_dir.path / "normalized_scores.svg"));

    // Plot generation is a pure function of the CSV inputs.
    TempDir report_dir2;
    REQUIRE(run_cli("report --in " + dir.path.string() + " --out " + report_dir2.path.string()) ==
            0);
    REQUIRE(slurp(report_dir.path / "normalized_scores.svg") ==
            slurp(report_dir2.path / "normalized_scores.svg"));
}

TEST_CASE("missing bench config file exits with a data error") {
    TempDir dir;
    REQUIRE(run_cli("bench --config /nonexistent/bench.json --out " + dir.path.string()) == 2);
}
