// labeltrust command-line tool: synthesize and corrupt datasets, score
// training examples with mislabel detectors, evaluate calibration, run
// single pipelines or full benchmark sweeps, and render reports from the
// emitted CSVs.
//
// Exit codes: 0 success, 1 configuration error, 2 data error, 3 internal
// error.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "labeltrust/bench.hpp"
#include "labeltrust/calibration.hpp"
#include "labeltrust/dataset.hpp"
#include "labeltrust/detect.hpp"
#include "labeltrust/io.hpp"
#include "labeltrust/pipeline.hpp"
#include "labeltrust/svg.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace labeltrust;

namespace {

std::string default_out_dir() {
    if (const char* env = std::getenv("LABELTRUST_OUT")) return env;
    return ".";
}

fs::path ensure_out_dir(const std::string& out) {
    fs::path dir(out);
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw DataError("cannot create output directory '" + out + "'");
    return dir;
}

NoiseSpec parse_noise(const std::string& text) {
    NoiseSpec spec;
    if (text.empty() || text == "none") return spec;
    const auto colon = text.find(':');
    const std::string kind = text.substr(0, colon);
    const std::string arg = colon == std::string::npos ? "" : text.substr(colon + 1);
    if (kind == "uniform") {
        if (arg.empty()) throw ConfigError("--noise uniform:<rho> needs a rate");
        spec.kind = NoiseSpec::Kind::UniformFlip;
        spec.rho = std::stod(arg);
    } else if (kind == "flips") {
        if (arg.empty()) throw ConfigError("--noise flips:<k> needs a count");
        spec.kind = NoiseSpec::Kind::FlipCount;
        spec.per_class_count = std::stoi(arg);
    } else if (kind == "matrix") {
        if (arg.empty()) throw ConfigError("--noise matrix:<path> needs a JSON file");
        spec.kind = NoiseSpec::Kind::Matrix;
        spec.transition = matrix_from_json(load_json(arg).at("transition"));
    } else {
        throw ConfigError("unknown noise spec '" + text + "'");
    }
    return spec;
}

std::vector<double> parse_quantiles(const std::string& text) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (!item.empty()) out.push_back(std::stod(item));
    }
    if (out.empty()) throw ConfigError("--quantiles list is empty");
    return out;
}

void write_manifest(const fs::path& dir, const std::string& command, const json& resolved,
                    const std::vector<std::string>& outputs) {
    json manifest = {{"command", command}, {"config", resolved}, {"outputs", outputs}};
    save_json(manifest, (dir / "manifest.json").string());
}

std::string scores_csv(const TrustScores& scores) {
    std::ostringstream csv;
    csv << "index,score,oob_count,flags\n";
    csv.precision(17);
    for (int i = 0; i < scores.n(); ++i) {
        csv << i << ',' << scores.scores[static_cast<std::size_t>(i)] << ','
            << (scores.oob_counts.empty() ? 0 : scores.oob_counts[static_cast<std::size_t>(i)])
            << ','
            << (scores.flags.empty() ? 0
                                     : static_cast<int>(scores.flags[static_cast<std::size_t>(i)]))
            << '\n';
    }
    return csv.str();
}

// Shared flags describing a synthetic dataset or a CSV to ingest.
struct DataArgs {
    std::string synth;          // "two-moons" | "blobs" | empty
    int n = 100;
    double minority_fraction = 0.1;
    double noise_std = 0.15;
    std::string priors = "0.5,0.5";
    double cluster_std = 1.0;
    double center_radius = 3.0;
    std::string data_path;
    std::string label_column = "label";
    std::string true_label_column;
    std::vector<std::string> text_columns;
    std::string noise = "none";
    std::uint64_t seed = 0;

    void add_flags(CLI::App* cmd) {
        cmd->add_option("--synth", synth, "synthetic generator: two-moons or blobs");
        cmd->add_option("--n", n, "number of examples for --synth");
        cmd->add_option("--minority-fraction", minority_fraction, "two-moons class-0 fraction");
        cmd->add_option("--noise-std", noise_std, "two-moons jitter");
        cmd->add_option("--priors", priors, "blobs class priors, comma separated");
        cmd->add_option("--cluster-std", cluster_std, "blobs cluster spread");
        cmd->add_option("--center-radius", center_radius, "blobs center circle radius");
        cmd->add_option("--data", data_path, "CSV file to ingest instead of --synth");
        cmd->add_option("--label-column", label_column, "label column name for --data");
        cmd->add_option("--true-label-column", true_label_column,
                        "optional ground-truth column for --data");
        cmd->add_option("--text-column", text_columns, "text column(s) for --data");
        cmd->add_option("--noise", noise,
                        "label corruption: uniform:<rho>, flips:<k>, matrix:<path>, none");
        cmd->add_option("--seed", seed, "master seed");
    }

    std::vector<double> parse_priors() const {
        std::vector<double> out;
        std::stringstream ss(priors);
        std::string item;
        while (std::getline(ss, item, ','))
            if (!item.empty()) out.push_back(std::stod(item));
        return out;
    }

    Dataset make_clean() const {
        if (!synth.empty()) {
            if (synth == "two-moons" || synth == "two_moons")
                return make_two_moons(n, minority_fraction, noise_std, derive_seed(seed, 0));
            if (synth == "blobs")
                return make_blobs(n, parse_priors(), cluster_std, derive_seed(seed, 0), 2,
                                  center_radius);
            throw ConfigError("unknown --synth generator '" + synth + "'");
        }
        if (data_path.empty()) throw ConfigError("either --synth or --data is required");
        std::optional<std::string> truth;
        if (!true_label_column.empty()) truth = true_label_column;
        return load_csv(data_path, label_column, text_columns, truth);
    }

    json resolved() const {
        return {{"synth", synth},
                {"n", n},
                {"minority_fraction", minority_fraction},
                {"noise_std", noise_std},
                {"priors", priors},
                {"cluster_std", cluster_std},
                {"center_radius", center_radius},
                {"data", data_path},
                {"label_column", label_column},
                {"true_label_column", true_label_column},
                {"text_columns", text_columns},
                {"noise", noise},
                {"seed", seed}};
    }
};

int cmd_synth(const DataArgs& data, const std::string& out) {
    const fs::path dir = ensure_out_dir(out);
    Dataset ds = data.make_clean();
    const NoiseSpec noise = parse_noise(data.noise);
    ds = noise.apply(ds, derive_seed(data.seed, 1));
    write_dataset_csv(ds, (dir / "dataset.csv").string());
    json resolved = data.resolved();
    resolved["n_written"] = ds.n();
    resolved["num_classes"] = ds.num_classes;
    resolved["label_names"] = ds.label_names;
    write_manifest(dir, "synth", resolved, {"dataset.csv"});
    std::cout << "wrote " << (dir / "dataset.csv").string() << " (" << ds.n() << " rows)\n";
    return 0;
}

int cmd_corrupt(const DataArgs& data, const std::string& rules_path, const std::string& out) {
    const fs::path dir = ensure_out_dir(out);
    Dataset ds = data.make_clean();
    if (!ds.has_true_labels()) {
        // Treat the provided labels as ground truth for corruption purposes.
        ds.true_labels = ds.observed_labels;
        ds.refresh_mask();
    }
    std::vector<std::string> outputs = {"corrupted.csv"};
    if (!rules_path.empty()) {
        const json doc = load_json(rules_path);
        std::vector<LabelingRule> rules;
        for (const auto& r : doc.at("rules")) {
            LabelingRule rule;
            const std::string kind = r.value("kind", "threshold");
            rule.kind = kind == "token" ? LabelingRule::Kind::TokenPresence
                                        : LabelingRule::Kind::Threshold;
            rule.column = r.value("column", "");
            rule.feature_index = r.value("feature_index", -1);
            rule.threshold = r.value("threshold", 0.0);
            rule.token = r.value("token", "");
            rule.emitted_label = r.at("label").get<int>();
            rules.push_back(rule);
        }
        FallbackPolicy policy;
        const std::string fallback = doc.value("fallback", "global-majority");
        policy.kind = fallback == "uniform-random" ? FallbackPolicy::Kind::UniformRandom
                                                   : FallbackPolicy::Kind::GlobalMajority;
        policy.seed = derive_seed(data.seed, 2);
        ds = aggregate_rules(ds, rules, policy);
    } else {
        const NoiseSpec noise = parse_noise(data.noise);
        if (noise.kind == NoiseSpec::Kind::None)
            throw ConfigError("corrupt: provide --noise or --rules");
        ds = noise.apply(ds, derive_seed(data.seed, 1));
    }
    write_dataset_csv(ds, (dir / "corrupted.csv").string());
    int mislabeled = 0;
    if (ds.has_mask())
        for (auto m : *ds.mislabel_mask) mislabeled += m;
    json resolved = data.resolved();
    resolved["rules"] = rules_path;
    resolved["mislabeled"] = mislabeled;
    resolved["noise_ratio"] = ds.n() > 0 ? static_cast<double>(mislabeled) / ds.n() : 0.0;
    write_manifest(dir, "corrupt", resolved, outputs);
    std::cout << "wrote " << (dir / "corrupted.csv").string() << " (" << mislabeled
              << " mislabeled rows)\n";
    return 0;
}

struct DetectorArgs {
    std::string detector = "aum";
    std::string addon = "baseline";
    int bags = 5;
    double bag_fraction = 0.632;
    double lr = 0.1;
    double l2 = 1e-4;
    int epochs = 20;
    int batch_size = 32;
    int cal_size = 0;
    bool cal_noisy = false;
    std::string cal_data;

    void add_flags(CLI::App* cmd) {
        cmd->add_option("--detector", detector, "aum, cleanlab, consensus or small_loss");
        cmd->add_option("--addon", addon, "baseline, adjust, isotonic or sigmoid");
        cmd->add_option("--bags", bags, "independent-ensemble size");
        cmd->add_option("--bag-fraction", bag_fraction, "per-bag sample fraction");
        cmd->add_option("--lr", lr, "base-model learning rate");
        cmd->add_option("--l2", l2, "base-model L2 regularization");
        cmd->add_option("--epochs", epochs, "base-model epochs");
        cmd->add_option("--batch-size", batch_size, "base-model batch size");
        cmd->add_option("--cal-size", cal_size, "cap on calibration examples (0 = all)");
        cmd->add_flag("--cal-noisy", cal_noisy, "corrupt the calibration labels too");
        cmd->add_option("--cal-data", cal_data, "calibration CSV for --data mode");
    }

    DetectorSpec spec(std::uint64_t seed) const {
        DetectorSpec s = DetectorSpec::named(detector);
        s.addon = addon_from_string(addon);
        s.bags = bags;
        s.bag_fraction = bag_fraction;
        s.train.learning_rate = lr;
        s.train.l2 = l2;
        s.train.epochs = epochs;
        s.train.batch_size = batch_size;
        s.seed = seed;
        return s;
    }

    json resolved() const {
        return {{"detector", detector}, {"addon", addon},       {"bags", bags},
                {"bag_fraction", bag_fraction}, {"lr", lr},     {"l2", l2},
                {"epochs", epochs},     {"batch_size", batch_size}, {"cal_size", cal_size},
                {"cal_noisy", cal_noisy}, {"cal_data", cal_data}};
    }
};

// Scores every example of the (synthesized or ingested, optionally corrupted)
// dataset. For synthetic data the calibration set is a fresh clean sample
// from the same generator; for CSV data it must be supplied via --cal-data.
int cmd_detect(const DataArgs& data, const DetectorArgs& det, bool use_rff, int rff_dim,
               const std::string& out) {
    const fs::path dir = ensure_out_dir(out);
    Dataset clean = data.make_clean();
    const NoiseSpec noise = parse_noise(data.noise);
    Dataset noisy = noise.apply(clean, derive_seed(data.seed, 1));

    FeatureConfig fc;
    fc.use_rff = use_rff;
    fc.rff_dim = rff_dim;
    fc.text_columns = data.text_columns;
    fc.seed = derive_seed(data.seed, 2);
    const FeaturePipeline features = fit_feature_pipeline(noisy, fc);
    const Matrix X = features.transform(noisy);

    DetectorSpec spec = det.spec(derive_seed(data.seed, 3));
    std::optional<CalibrationData> calibration;
    if (spec.addon == Addon::Isotonic || spec.addon == Addon::Sigmoid) {
        if (!det.cal_data.empty()) {
            std::optional<std::string> truth;
            if (!data.true_label_column.empty()) truth = data.true_label_column;
            Dataset cal = load_csv(det.cal_data, data.label_column, data.text_columns, truth);
            calibration = CalibrationData{features.transform(cal), cal.observed_labels, false};
        } else if (!data.synth.empty()) {
            DataArgs cal_args = data;
            cal_args.seed = derive_seed(data.seed, 77);
            if (det.cal_size > 0) cal_args.n = det.cal_size;
            Dataset cal = cal_args.make_clean();
            if (det.cal_noisy) cal = noise.apply(cal, derive_seed(data.seed, 78));
            calibration =
                CalibrationData{features.transform(cal), cal.observed_labels, det.cal_noisy};
        } else {
            throw ConfigError("detect: --addon " + det.addon +
                              " needs --cal-data when using --data");
        }
        if (det.cal_size > 0 && calibration->X.rows() > det.cal_size) {
            const auto keep = detail::stratified_subsample(calibration->y, det.cal_size,
                                                           derive_seed(data.seed, 79));
            Matrix sub(static_cast<Eigen::Index>(keep.size()), calibration->X.cols());
            std::vector<int> sub_y(keep.size());
            for (std::size_t k = 0; k < keep.size(); ++k) {
                sub.row(static_cast<Eigen::Index>(k)) = calibration->X.row(keep[k]);
                sub_y[k] = calibration->y[static_cast<std::size_t>(keep[k])];
            }
            calibration->X = std::move(sub);
            calibration->y = std::move(sub_y);
        }
    }

    const TrustScores scores = run_detector(X, noisy.observed_labels, noisy.num_classes,
                                            calibration ? &*calibration : nullptr, spec);
    write_text_file((dir / "scores.csv").string(), scores_csv(scores));
    std::vector<std::string> outputs = {"scores.csv"};

    if (noisy.has_mask()) {
        // Rank of every known mislabeled example when sorted by ascending trust.
        std::vector<int> order(static_cast<std::size_t>(scores.n()));
        std::iota(order.begin(), order.end(), 0);
        std::sort(order.begin(), order.end(), [&](int a, int b) {
            if (scores.scores[a] != scores.scores[b]) return scores.scores[a] < scores.scores[b];
            return a < b;
        });
        std::vector<int> rank(order.size());
        for (std::size_t r = 0; r < order.size(); ++r)
            rank[static_cast<std::size_t>(order[r])] = static_cast<int>(r);
        json flip_ranks = json::array();
        int total = 0, caught = 0;
        double mean_rank = 0.0;
        const auto& mask = *noisy.mislabel_mask;
        for (int i = 0; i < scores.n(); ++i)
            if (mask[static_cast<std::size_t>(i)]) total++;
        for (int i = 0; i < scores.n(); ++i) {
            if (!mask[static_cast<std::size_t>(i)]) continue;
            flip_ranks.push_back({{"index", i}, {"rank", rank[static_cast<std::size_t>(i)]}});
            mean_rank += rank[static_cast<std::size_t>(i)];
            if (rank[static_cast<std::size_t>(i)] < total) caught++;
        }
        json quality = {{"mislabeled", total},
                        {"caught_in_bottom_k", caught},
                        {"mean_rank", total > 0 ? mean_rank / total : 0.0},
                        {"n", scores.n()},
                        {"flip_ranks", flip_ranks}};
        save_json(quality, (dir / "detection_quality.json").string());
        outputs.push_back("detection_quality.json");
    }

    json resolved = data.resolved();
    resolved.update(det.resolved());
    resolved["use_rff"] = use_rff;
    resolved["rff_dim"] = rff_dim;
    write_manifest(dir, "detect", resolved, outputs);
    std::cout << "wrote " << (dir / "scores.csv").string() << " (" << scores.n() << " rows)\n";
    return 0;
}

int cmd_calibrate_eval(const DataArgs& data, const DetectorArgs& det, const std::string& method,
                       int bins, bool use_rff, int rff_dim, const std::string& out) {
    const fs::path dir = ensure_out_dir(out);
    TaskConfig tc;
    tc.name = data.synth.empty() ? "ingested" : data.synth;
    tc.seed = data.seed;
    tc.noise = parse_noise(data.noise);
    tc.features.use_rff = use_rff;
    tc.features.rff_dim = rff_dim;
    tc.features.text_columns = data.text_columns;
    tc.noisy_calibration = det.cal_noisy;
    tc.calibration_size = det.cal_size;
    Task task;
    if (!data.synth.empty()) {
        if (data.synth == "blobs") {
            tc.generator = TaskConfig::Generator::Blobs;
            tc.n = data.n;
            tc.priors = data.parse_priors();
            tc.cluster_std = data.cluster_std;
            tc.center_radius = data.center_radius;
        } else {
            tc.generator = TaskConfig::Generator::TwoMoons;
            tc.n = data.n;
            tc.minority_fraction = data.minority_fraction;
            tc.moons_noise_std = data.noise_std;
        }
        task = build_task(tc);
    } else {
        task = build_task_from(data.make_clean(), tc);
    }

    TrainConfig train;
    train.learning_rate = det.lr;
    train.l2 = det.l2;
    train.epochs = det.epochs;
    train.batch_size = det.batch_size;
    train.seed = derive_seed(data.seed, 11);
    const LinearModel model = train_sgd(task.train_x, task.train_y, task.C, train).model;

    const CalibrationMethod cal_method =
        method == "sigmoid" ? CalibrationMethod::Sigmoid : CalibrationMethod::Isotonic;
    const auto calibrated = calibrate_model(model, task.cal_x, task.cal_y, cal_method);

    const Matrix raw_val = model.predict_confidences(task.val_x);
    const Matrix cal_val = calibrated.predict_confidences(task.val_x);
    const double ece_before = classwise_ece(raw_val, task.val_y, bins);
    const double ece_after = classwise_ece(cal_val, task.val_y, bins);

    std::ostringstream csv;
    csv << "class,model,bin,mean_confidence,mean_accuracy,mass\n";
    csv.precision(10);
    for (int c = 0; c < task.C; ++c) {
        const auto before = reliability_bins(raw_val, task.val_y, c, bins);
        const auto after = reliability_bins(cal_val, task.val_y, c, bins);
        for (int b = 0; b < bins; ++b)
            csv << c << ",raw," << b << ',' << before[b].mean_confidence << ','
                << before[b].mean_accuracy << ',' << before[b].mass << '\n';
        for (int b = 0; b < bins; ++b)
            csv << c << ",calibrated," << b << ',' << after[b].mean_confidence << ','
                << after[b].mean_accuracy << ',' << after[b].mass << '\n';
    }
    write_text_file((dir / "reliability.csv").string(), csv.str());

    json report = {{"classwise_ece_before", ece_before},
                   {"classwise_ece_after", ece_after},
                   {"method", method},
                   {"bins", bins},
                   {"calibration_examples", static_cast<int>(task.cal_y.size())}};
    save_json(report, (dir / "calibration_report.json").string());
    json resolved = data.resolved();
    resolved.update(det.resolved());
    resolved["method"] = method;
    resolved["bins"] = bins;
    write_manifest(dir, "calibrate-eval", resolved,
                   {"calibration_report.json", "reliability.csv"});
    std::cout << "classwise ECE " << ece_before << " -> " << ece_after << "\n";
    return 0;
}

int cmd_pipeline(const DataArgs& data, const DetectorArgs& det, double q, double final_lr,
                 double final_l2, bool use_rff, int rff_dim, const std::string& out) {
    const fs::path dir = ensure_out_dir(out);
    PipelineConfig config;
    config.task.name = data.synth.empty() ? "ingested" : data.synth;
    config.task.seed = data.seed;
    config.task.noise = parse_noise(data.noise);
    config.task.features.use_rff = use_rff;
    config.task.features.rff_dim = rff_dim;
    config.task.noisy_calibration = det.cal_noisy;
    config.task.calibration_size = det.cal_size;
    if (data.synth == "blobs") {
        config.task.generator = TaskConfig::Generator::Blobs;
        config.task.n = data.n;
        config.task.priors = data.parse_priors();
        config.task.cluster_std = data.cluster_std;
        config.task.center_radius = data.center_radius;
    } else if (!data.synth.empty()) {
        config.task.generator = TaskConfig::Generator::TwoMoons;
        config.task.n = data.n;
        config.task.minority_fraction = data.minority_fraction;
        config.task.moons_noise_std = data.noise_std;
    } else {
        throw ConfigError("pipeline: only --synth data is supported");
    }
    config.detector = det.spec(0);
    config.q = q;
    config.final_config.learning_rate = final_lr;
    config.final_config.l2 = final_l2;
    config.master_seed = data.seed;

    const PipelineResult result = run_three_stage(config);
    json doc = {{"task", result.task},
                {"detector", result.detector},
                {"addon", to_string(result.addon)},
                {"q", result.q},
                {"status", result.status},
                {"test_log_loss", result.test_log_loss},
                {"test_balanced_accuracy", result.test_balanced_accuracy},
                {"validation_log_loss", result.validation_log_loss},
                {"normalized_score", result.normalized_score},
                {"filtered_size", result.filtered_size},
                {"seed", result.seed}};
    save_json(doc, (dir / "pipeline_result.json").string());
    json resolved = data.resolved();
    resolved.update(det.resolved());
    resolved["q"] = q;
    resolved["final_lr"] = final_lr;
    resolved["final_l2"] = final_l2;
    write_manifest(dir, "pipeline", resolved, {"pipeline_result.json"});
    std::cout << "test log loss " << result.test_log_loss << ", normalized "
              << result.normalized_score << "\n";
    return 0;
}

void emit_bench_svgs(const BenchResult& result, const fs::path& dir,
                     std::vector<std::string>& outputs) {
    // Boxplot of normalized scores per detector x addon.
    std::map<std::string, SvgBox> boxes;
    const char* palette[] = {"#2ca02c", "#9467bd", "#1f77b4", "#ff7f0e"};
    for (const BenchUnit& u : result.units) {
        if (u.status != "ok" || !std::isfinite(u.normalized)) continue;
        const std::string key = u.detector + "\n" + to_string(u.addon);
        auto& box = boxes[key];
        box.label = u.detector + "/" + to_string(u.addon);
        box.color = palette[static_cast<int>(u.addon) % 4];
        box.values.push_back(u.normalized);
    }
    std::vector<SvgBox> box_list;
    for (auto& [_, box] : boxes) box_list.push_back(box);
    write_text_file((dir / "normalized_scores.svg").string(),
                    svg_boxplot(box_list, "normalized test loss"));
    outputs.push_back("normalized_scores.svg");

    // Baseline vs isotonic scatter, isotonic vs sigmoid scatter.
    auto scatter_points = [&](Addon x_addon, Addon y_addon) {
        struct Key {
            std::string task;
            std::uint64_t seed;
            std::string detector;
            bool operator<(const Key& o) const {
                return std::tie(task, seed, detector) < std::tie(o.task, o.seed, o.detector);
            }
        };
        std::map<Key, std::map<Addon, double>> scores;
        for (const BenchUnit& u : result.units)
            if (u.status == "ok" && std::isfinite(u.normalized))
                scores[{u.task, u.seed, u.detector}][u.addon] = u.normalized;
        SvgSeries series;
        for (const auto& [key, by_addon] : scores) {
            const auto x = by_addon.find(x_addon);
            const auto y = by_addon.find(y_addon);
            if (x != by_addon.end() && y != by_addon.end())
                series.points.push_back({x->second, y->second});
        }
        return series;
    };
    {
        SvgSeries s = scatter_points(Addon::Baseline, Addon::Isotonic);
        s.label = "isotonic";
        s.color = "#1f77b4";
        write_text_file((dir / "baseline_vs_isotonic.svg").string(),
                        svg_scatter({s}, "baseline normalized loss", "calibrated normalized loss",
                                    true));
        outputs.push_back("baseline_vs_isotonic.svg");
    }
    {
        SvgSeries s = scatter_points(Addon::Isotonic, Addon::Sigmoid);
        if (!s.points.empty()) {
            s.label = "pairs";
            s.color = "#9467bd";
            write_text_file((dir / "isotonic_vs_sigmoid.svg").string(),
                            svg_scatter({s}, "isotonic normalized loss",
                                        "sigmoid normalized loss", true));
            outputs.push_back("isotonic_vs_sigmoid.svg");
        }
    }

    // Median minority-removal curve per addon.
    std::map<Addon, std::vector<const MinorityCurve*>> curves;
    for (const BenchUnit& u : result.units)
        if (u.status == "ok" && u.curve.has_minority) curves[u.addon].push_back(&u.curve);
    std::vector<SvgSeries> curve_series;
    for (const auto& [addon, list] : curves) {
        SvgSeries s;
        s.label = to_string(addon);
        s.color = palette[static_cast<int>(addon) % 4];
        s.draw_line = true;
        for (double x = 0.0; x <= 1.0001; x += 0.05) {
            std::vector<double> ys;
            for (const MinorityCurve* curve : list) {
                double y = 0.0;  // step interpolation at x
                for (const auto& [cx, cy] : curve->points) {
                    if (cx > x) break;
                    y = cy;
                }
                ys.push_back(y);
            }
            std::sort(ys.begin(), ys.end());
            if (!ys.empty()) s.points.push_back({x, ys[ys.size() / 2]});
        }
        curve_series.push_back(std::move(s));
    }
    write_text_file((dir / "minority_curves.svg").string(),
                    svg_scatter(curve_series, "fraction removed", "minority fraction removed",
                                true));
    outputs.push_back("minority_curves.svg");
}

int cmd_bench(const std::string& config_path, int parallelism, const std::string& quantiles,
              std::uint64_t seed, bool seed_set, const std::string& out) {
    const fs::path dir = ensure_out_dir(out);
    json doc = load_json(config_path);
    BenchConfig config = doc.get<BenchConfig>();
    if (parallelism > 0) config.parallelism = parallelism;
    if (!quantiles.empty()) config.search.quantiles = parse_quantiles(quantiles);
    if (seed_set) config.seeds = {seed};

    const BenchResult result = run_bench(config);

    std::vector<std::string> outputs;
    write_text_file((dir / "trials.csv").string(), trials_csv(result));
    outputs.push_back("trials.csv");
    write_text_file((dir / "boxplot.csv").string(), boxplot_csv(result));
    outputs.push_back("boxplot.csv");
    write_text_file((dir / "minority_curves.csv").string(), minority_curves_csv(result));
    outputs.push_back("minority_curves.csv");
    write_text_file((dir / "wilcoxon.csv").string(),
                    wilcoxon_csv(addon_vs_baseline_tables(result)));
    outputs.push_back("wilcoxon.csv");
    write_text_file((dir / "scatter_baseline_isotonic.csv").string(),
                    scatter_csv(result, Addon::Baseline, Addon::Isotonic));
    outputs.push_back("scatter_baseline_isotonic.csv");
    write_text_file((dir / "scatter_isotonic_sigmoid.csv").string(),
                    scatter_csv(result, Addon::Isotonic, Addon::Sigmoid));
    outputs.push_back("scatter_isotonic_sigmoid.csv");
    save_json(summary_json(result), (dir / "summary.json").string());
    outputs.push_back("summary.json");
    emit_bench_svgs(result, dir, outputs);

    write_manifest(dir, "bench", doc, outputs);
    int failed = 0;
    for (const BenchUnit& u : result.units)
        if (u.status != "ok") failed++;
    std::cout << "bench finished: " << result.units.size() << " units, " << failed
              << " failed; outputs in " << dir.string() << "\n";
    return 0;
}

// Rebuilds the SVG plots from previously emitted CSVs. Plots are pure
// functions of the CSV contents.
int cmd_report(const std::string& in_dir, const std::string& out) {
    const fs::path src(in_dir);
    const fs::path dir = ensure_out_dir(out);
    std::vector<std::string> outputs;

    auto read_rows = [](const fs::path& path) {
        std::ifstream in(path);
        if (!in) throw DataError("report: cannot open '" + path.string() + "'");
        std::vector<std::vector<std::string>> rows;
        std::string line;
        bool header = true;
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            if (header) {
                header = false;
                continue;
            }
            std::vector<std::string> fields;
            std::stringstream ss(line);
            std::string item;
            while (std::getline(ss, item, ',')) fields.push_back(item);
            rows.push_back(std::move(fields));
        }
        return rows;
    };

    // boxplot.csv: task,seed,detector,addon,normalized,...
    {
        std::map<std::string, SvgBox> boxes;
        for (const auto& row : read_rows(src / "boxplot.csv")) {
            if (row.size() < 5 || row.back() != "ok") continue;
            const double value = std::stod(row[4]);
            if (!std::isfinite(value)) continue;
            auto& box = boxes[row[2] + "/" + row[3]];
            box.label = row[2] + "/" + row[3];
            box.values.push_back(value);
        }
        std::vector<SvgBox> list;
        for (auto& [_, b] : boxes) list.push_back(b);
        write_text_file((dir / "normalized_scores.svg").string(),
                        svg_boxplot(list, "normalized test loss"));
        outputs.push_back("normalized_scores.svg");
    }
    // scatter CSVs
    for (const std::string name : {"scatter_baseline_isotonic", "scatter_isotonic_sigmoid"}) {
        const fs::path path = src / (name + ".csv");
        if (!fs::exists(path)) continue;
        SvgSeries series;
        for (const auto& row : read_rows(path)) {
            if (row.size() < 5) continue;
            series.points.push_back({std::stod(row[3]), std::stod(row[4])});
        }
        write_text_file((dir / (name + ".svg")).string(),
                        svg_scatter({series}, "x normalized loss", "y normalized loss", true));
        outputs.push_back(name + ".svg");
    }
    write_manifest(dir, "report", {{"input", in_dir}}, outputs);
    std::cout << "report written to " << dir.string() << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"mislabeled-example detection toolkit"};
    app.require_subcommand(1);
    app.fallthrough();  // accept global flags after the subcommand name

    std::string out = default_out_dir();
    app.add_option("--out", out, "output directory")->capture_default_str();

    DataArgs data;
    DetectorArgs det;
    bool use_rff = false;
    int rff_dim = kDefaultRffDim;
    std::string method = "isotonic";
    int bins = 10;
    double q = 0.1;
    double final_lr = 0.1, final_l2 = 1e-4;
    std::string rules_path;
    std::string config_path;
    std::string quantiles;
    int parallelism = 0;
    std::uint64_t bench_seed = 0;
    std::string report_in;

    CLI::App* synth = app.add_subcommand("synth", "generate a synthetic dataset CSV");
    data.add_flags(synth);

    CLI::App* corrupt = app.add_subcommand("corrupt", "corrupt labels of a dataset");
    data.add_flags(corrupt);
    corrupt->add_option("--rules", rules_path, "labeling-rule JSON to aggregate instead of noise");

    CLI::App* detect = app.add_subcommand("detect", "score training examples by label trust");
    data.add_flags(detect);
    det.add_flags(detect);
    detect->add_flag("--rff", use_rff, "apply random Fourier features");
    detect->add_option("--rff-dim", rff_dim, "random feature count");

    CLI::App* caleval = app.add_subcommand("calibrate-eval",
                                           "measure classwise calibration error before/after");
    data.add_flags(caleval);
    det.add_flags(caleval);
    caleval->add_option("--method", method, "isotonic or sigmoid");
    caleval->add_option("--bins", bins, "reliability bins");
    caleval->add_flag("--rff", use_rff, "apply random Fourier features");
    caleval->add_option("--rff-dim", rff_dim, "random feature count");

    CLI::App* pipeline = app.add_subcommand("pipeline", "one detection => filtering => training run");
    data.add_flags(pipeline);
    det.add_flags(pipeline);
    pipeline->add_option("--q", q, "filter quantile in [0,1)");
    pipeline->add_option("--final-lr", final_lr, "final classifier learning rate");
    pipeline->add_option("--final-l2", final_l2, "final classifier L2");
    pipeline->add_flag("--rff", use_rff, "apply random Fourier features");
    pipeline->add_option("--rff-dim", rff_dim, "random feature count");

    CLI::App* bench = app.add_subcommand("bench", "full benchmark sweep from a JSON config");
    bench->add_option("--config", config_path, "bench configuration JSON")->required();
    bench->add_option("--parallelism", parallelism, "worker threads (0 = hardware)");
    bench->add_option("--quantiles", quantiles, "override quantile grid, comma separated");
    CLI::Option* seed_opt = bench->add_option("--seed", bench_seed, "override the seed list");

    CLI::App* report = app.add_subcommand("report", "regenerate SVG plots from bench CSVs");
    report->add_option("--in", report_in, "directory with bench CSVs")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (synth->parsed()) return cmd_synth(data, out);
        if (corrupt->parsed()) return cmd_corrupt(data, rules_path, out);
        if (detect->parsed()) return cmd_detect(data, det, use_rff, rff_dim, out);
        if (caleval->parsed())
            return cmd_calibrate_eval(data, det, method, bins, use_rff, rff_dim, out);
        if (pipeline->parsed())
            return cmd_pipeline(data, det, q, final_lr, final_l2, use_rff, rff_dim, out);
        if (bench->parsed())
            return cmd_bench(config_path, parallelism, quantiles, bench_seed,
                             seed_opt->count() > 0, out);
        if (report->parsed()) return cmd_report(report_in, out);
    } catch (const ConfigError& e) {
        std::cerr << "configuration error: " << e.what() << "\n";
        return 1;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return 3;
    }
    return 1;
}
