#pragma once

// Multi-task benchmark driver: runs detector x addon x seed sweeps over
// synthetic tasks with a shared random-search discipline, computes the
// none/silver (optionally gold/random) references per task, normalizes test
// losses to the 100-200 scale and assembles comparison tables.

#include <atomic>
#include <cstdint>
#include <exception>
#include <map>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "labeltrust/pipeline.hpp"
#include "labeltrust/stats.hpp"
#include "labeltrust/svg.hpp"

namespace labeltrust {

/// Runs fn(0..count-1) on a bounded pool; the first exception is rethrown on
/// the caller thread after completion.
template <class Fn>
void parallel_for(int count, int parallelism, Fn&& fn) {
    if (parallelism <= 0)
        parallelism = static_cast<int>(std::thread::hardware_concurrency());
    parallelism = std::max(1, std::min(parallelism, count));
    if (parallelism == 1) {
        for (int i = 0; i < count; ++i) fn(i);
        return;
    }
    std::atomic<int> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    auto worker = [&]() {
        while (true) {
            const int i = next.fetch_add(1);
            if (i >= count) return;
            try {
                fn(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!error) error = std::current_exception();
            }
        }
    };
    std::vector<std::thread> pool;
    for (int t = 0; t < parallelism; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
    if (error) std::rethrow_exception(error);
}

/// Reference run under the same search discipline as the method pipelines:
/// n_samples (learning rate, L2) draws for the final classifier, selected on
/// clean-validation loss. The random reference additionally sweeps the
/// quantile grid over uniform trust scores.
inline PipelineResult reference_with_search(ReferenceKind kind, const Task& task, int n_samples,
                                            const std::vector<double>& quantiles,
                                            std::uint64_t seed) {
    if (n_samples < 1) throw ConfigError("reference: n_samples must be >= 1");
    SearchSpace space;
    PipelineResult best;
    best.validation_log_loss = std::numeric_limits<double>::infinity();
    for (int s = 0; s < n_samples; ++s) {
        Rng rng = make_rng(derive_seed(seed, 40 + static_cast<std::uint64_t>(s)));
        TrainConfig config;
        config.learning_rate = log_uniform(rng, space.lr_min, space.lr_max);
        config.l2 = log_uniform(rng, space.l2_min, space.l2_max);
        config.seed = derive_seed(seed, 90 + static_cast<std::uint64_t>(s));
        PipelineResult candidate;
        try {
            candidate = run_reference(kind, task, config,
                                      derive_seed(seed, 140 + static_cast<std::uint64_t>(s)),
                                      quantiles);
        } catch (const NumericError&) {
            continue;  // diverged sample
        }
        if (candidate.validation_log_loss < best.validation_log_loss) best = candidate;
    }
    if (!std::isfinite(best.validation_log_loss))
        throw NumericError("reference: every sampled configuration failed");
    best.task = task.name;
    best.detector = to_string(kind);
    best.seed = seed;
    return best;
}

struct ReferenceSet {
    PipelineResult none;
    PipelineResult silver;
    std::optional<PipelineResult> gold;
    std::optional<PipelineResult> random;
};

struct BenchConfig {
    std::vector<TaskConfig> tasks;
    std::vector<std::string> detectors = {"aum", "cleanlab", "consensus", "small_loss"};
    std::vector<Addon> addons = {Addon::Baseline, Addon::Isotonic};
    std::vector<std::uint64_t> seeds = {0};
    SearchConfig search;
    TrainConfig detector_train;  // template for base models (rates come from the search)
    int parallelism = 0;
    bool compute_gold = false;
    bool compute_random = false;
};

struct BenchUnit {
    std::string task;
    std::uint64_t seed = 0;
    std::string detector;
    Addon addon = Addon::Baseline;
    SearchResult search;
    double normalized = std::numeric_limits<double>::quiet_NaN();
    MinorityCurve curve;  // winner's trust ranking vs observed minority classes
    std::string status = "ok";
};

struct BenchContextKey {
    std::string task;
    std::uint64_t seed = 0;
    bool operator<(const BenchContextKey& other) const {
        return std::tie(task, seed) < std::tie(other.task, other.seed);
    }
};

struct BenchResult {
    std::vector<BenchUnit> units;
    std::map<BenchContextKey, ReferenceSet> references;
};

/// Runs the full sweep. Units (task x seed x detector x addon) execute
/// concurrently with per-unit derived seeds, so the outcome is independent of
/// scheduling.
inline BenchResult run_bench(const BenchConfig& config) {
    if (config.tasks.empty()) throw ConfigError("bench: no tasks");
    struct Context {
        BenchContextKey key;
        Task task;
        ReferenceSet refs;
    };

    std::vector<Context> contexts;
    std::vector<TaskConfig> seeded_configs;
    for (const TaskConfig& task_config : config.tasks)
        for (std::uint64_t seed : config.seeds) {
            Context ctx;
            ctx.key = {task_config.name, seed};
            contexts.push_back(std::move(ctx));
            TaskConfig seeded = task_config;
            seeded.seed = derive_seed(seed, fnv1a64(task_config.name));
            seeded_configs.push_back(std::move(seeded));
        }

    parallel_for(static_cast<int>(contexts.size()), config.parallelism, [&](int i) {
        Context& ctx = contexts[static_cast<std::size_t>(i)];
        ctx.task = build_task(seeded_configs[static_cast<std::size_t>(i)]);
        const std::uint64_t ref_seed = derive_seed(ctx.key.seed, 0x4ef5ULL);
        ctx.refs.none = reference_with_search(ReferenceKind::None, ctx.task,
                                              config.search.n_samples, config.search.quantiles,
                                              derive_seed(ref_seed, 1));
        ctx.refs.silver = reference_with_search(ReferenceKind::Silver, ctx.task,
                                                config.search.n_samples, config.search.quantiles,
                                                derive_seed(ref_seed, 2));
        if (config.compute_gold)
            ctx.refs.gold = reference_with_search(ReferenceKind::Gold, ctx.task,
                                                  config.search.n_samples, config.search.quantiles,
                                                  derive_seed(ref_seed, 3));
        if (config.compute_random)
            ctx.refs.random = reference_with_search(ReferenceKind::Random, ctx.task,
                                                    config.search.n_samples,
                                                    config.search.quantiles,
                                                    derive_seed(ref_seed, 4));
    });

    std::vector<BenchUnit> units;
    for (std::size_t c = 0; c < contexts.size(); ++c)
        for (const std::string& detector : config.detectors)
            for (Addon addon : config.addons) {
                BenchUnit unit;
                unit.task = contexts[c].key.task;
                unit.seed = contexts[c].key.seed;
                unit.detector = detector;
                unit.addon = addon;
                units.push_back(std::move(unit));
            }

    std::map<BenchContextKey, std::size_t> context_of;
    for (std::size_t c = 0; c < contexts.size(); ++c) context_of[contexts[c].key] = c;

    parallel_for(static_cast<int>(units.size()), config.parallelism, [&](int i) {
        BenchUnit& unit = units[static_cast<std::size_t>(i)];
        const Context& ctx = contexts[context_of.at({unit.task, unit.seed})];
        DetectorSpec spec = DetectorSpec::named(unit.detector);
        spec.addon = unit.addon;
        spec.train = config.detector_train;
        const std::uint64_t unit_seed = derive_seed(
            unit.seed,
            fnv1a64(unit.task + "/" + unit.detector + "/" + to_string(unit.addon)));
        try {
            unit.search = random_search(ctx.task, spec, config.search, unit_seed);
            unit.normalized = normalize_score(unit.search.best.test_log_loss,
                                              ctx.refs.none.test_log_loss,
                                              ctx.refs.silver.test_log_loss);
            unit.search.best.normalized_score = unit.normalized;

            // Minority-removal curve of the winning sample's trust ranking.
            DetectorSpec winner = spec;
            winner.train.learning_rate = unit.search.best_row.detector_lr;
            winner.train.l2 = unit.search.best_row.detector_l2;
            winner.seed = derive_seed(unit_seed, 1000 + static_cast<std::uint64_t>(
                                                      unit.search.best_row.sample));
            const CalibrationData cal = ctx.task.calibration();
            const bool needs_cal = spec.addon == Addon::Isotonic || spec.addon == Addon::Sigmoid;
            const TrustScores scores = run_detector(ctx.task.train_x, ctx.task.train_y,
                                                    ctx.task.C, needs_cal ? &cal : nullptr,
                                                    winner);
            unit.curve = minority_removal_curve(scores.scores, ctx.task.train_y, ctx.task.C);
        } catch (const std::exception& e) {
            unit.status = std::string("failed: ") + e.what();
        }
    });

    BenchResult result;
    result.units = std::move(units);
    for (Context& ctx : contexts) result.references.emplace(ctx.key, std::move(ctx.refs));
    return result;
}

// --- Comparison tables ----------------------------------------------------------

struct ComparisonRow {
    std::string detector;  // "all" = pooled over detectors
    std::string addon;
    int wins = 0, draws = 0, losses = 0;
    double p_value = 1.0;
    bool significant = false;
    int pairs = 0;
};

/// Pairs each addon's normalized score with the baseline's on matching
/// (task, seed, detector) units and runs the signed-rank test per detector
/// plus pooled over all detectors. Wins count pairs where the addon scored
/// lower (better) than the baseline.
inline std::vector<ComparisonRow> addon_vs_baseline_tables(const BenchResult& result,
                                                           double alpha = 0.95) {
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

    std::vector<Addon> addons;
    for (const BenchUnit& u : result.units)
        if (u.addon != Addon::Baseline &&
            std::find(addons.begin(), addons.end(), u.addon) == addons.end())
            addons.push_back(u.addon);

    std::vector<std::string> detectors;
    for (const BenchUnit& u : result.units)
        if (std::find(detectors.begin(), detectors.end(), u.detector) == detectors.end())
            detectors.push_back(u.detector);
    detectors.push_back("all");

    std::vector<ComparisonRow> rows;
    for (const std::string& detector : detectors)
        for (Addon addon : addons) {
            std::vector<double> a, b;  // addon, baseline
            for (const auto& [key, by_addon] : scores) {
                if (detector != "all" && key.detector != detector) continue;
                const auto base = by_addon.find(Addon::Baseline);
                const auto var = by_addon.find(addon);
                if (base == by_addon.end() || var == by_addon.end()) continue;
                a.push_back(var->second);
                b.push_back(base->second);
            }
            ComparisonRow row;
            row.detector = detector;
            row.addon = to_string(addon);
            row.pairs = static_cast<int>(a.size());
            if (!a.empty()) {
                const WilcoxonResult w = wilcoxon_signed_rank(a, b, alpha);
                row.wins = w.wins;
                row.draws = w.draws;
                row.losses = w.losses;
                row.p_value = w.p_value;
                row.significant = w.significant;
            }
            rows.push_back(row);
        }
    return rows;
}

// --- Output emission --------------------------------------------------------------

inline std::string trials_csv(const BenchResult& result) {
    std::ostringstream csv;
    csv << "task,seed,detector,addon,trial,sample,q,detector_lr,detector_l2,final_lr,final_l2,"
           "val_loss,val_bacc,filtered_size,status\n";
    csv.precision(10);
    for (const BenchUnit& u : result.units)
        for (const TrialRow& t : u.search.trials)
            csv << u.task << ',' << u.seed << ',' << u.detector << ',' << to_string(u.addon)
                << ',' << t.trial << ',' << t.sample << ',' << t.q << ',' << t.detector_lr << ','
                << t.detector_l2 << ',' << t.final_lr << ',' << t.final_l2 << ',' << t.val_loss
                << ',' << t.val_bacc << ',' << t.filtered_size << ',' << t.status << '\n';
    return csv.str();
}

inline std::string boxplot_csv(const BenchResult& result) {
    std::ostringstream csv;
    csv << "task,seed,detector,addon,normalized_score,test_log_loss,test_balanced_accuracy,"
           "minority_curve_area,status\n";
    csv.precision(10);
    for (const BenchUnit& u : result.units)
        csv << u.task << ',' << u.seed << ',' << u.detector << ',' << to_string(u.addon) << ','
            << u.normalized << ',' << u.search.best.test_log_loss << ','
            << u.search.best.test_balanced_accuracy << ',' << u.curve.area_above_diagonal << ','
            << u.status << '\n';
    return csv.str();
}

inline std::string minority_curves_csv(const BenchResult& result) {
    std::ostringstream csv;
    csv << "task,seed,detector,addon,fraction_removed,minority_fraction_removed\n";
    csv.precision(8);
    for (const BenchUnit& u : result.units) {
        if (u.status != "ok" || !u.curve.has_minority) continue;
        for (const auto& [x, y] : u.curve.points)
            csv << u.task << ',' << u.seed << ',' << u.detector << ',' << to_string(u.addon)
                << ',' << x << ',' << y << '\n';
    }
    return csv.str();
}

inline std::string wilcoxon_csv(const std::vector<ComparisonRow>& rows) {
    std::ostringstream csv;
    csv << "detector,addon,pairs,wins,draws,losses,p_value,significant\n";
    csv.precision(8);
    for (const ComparisonRow& r : rows)
        csv << r.detector << ',' << r.addon << ',' << r.pairs << ',' << r.wins << ',' << r.draws
            << ',' << r.losses << ',' << r.p_value << ',' << (r.significant ? 1 : 0) << '\n';
    return csv.str();
}

/// Per-pair scatter data of two addons' scores (e.g. baseline vs isotonic).
inline std::string scatter_csv(const BenchResult& result, Addon x_addon, Addon y_addon) {
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
    std::ostringstream csv;
    csv << "task,seed,detector," << to_string(x_addon) << ',' << to_string(y_addon) << '\n';
    csv.precision(10);
    for (const auto& [key, by_addon] : scores) {
        const auto x = by_addon.find(x_addon);
        const auto y = by_addon.find(y_addon);
        if (x == by_addon.end() || y == by_addon.end()) continue;
        csv << key.task << ',' << key.seed << ',' << key.detector << ',' << x->second << ','
            << y->second << '\n';
    }
    return csv.str();
}

inline nlohmann::json summary_json(const BenchResult& result) {
    nlohmann::json units = nlohmann::json::array();
    for (const BenchUnit& u : result.units) {
        units.push_back({{"task", u.task},
                         {"seed", u.seed},
                         {"detector", u.detector},
                         {"addon", to_string(u.addon)},
                         {"status", u.status},
                         {"normalized_score", u.normalized},
                         {"test_log_loss", u.search.best.test_log_loss},
                         {"test_balanced_accuracy", u.search.best.test_balanced_accuracy},
                         {"selected_q", u.search.best.q},
                         {"filtered_size", u.search.best.filtered_size},
                         {"minority_curve_area", u.curve.area_above_diagonal}});
    }
    nlohmann::json refs = nlohmann::json::array();
    for (const auto& [key, set] : result.references) {
        nlohmann::json entry = {{"task", key.task},
                                {"seed", key.seed},
                                {"none_test_log_loss", set.none.test_log_loss},
                                {"silver_test_log_loss", set.silver.test_log_loss}};
        if (set.gold) entry["gold_test_log_loss"] = set.gold->test_log_loss;
        if (set.random) entry["random_test_log_loss"] = set.random->test_log_loss;
        refs.push_back(std::move(entry));
    }
    nlohmann::json tables = nlohmann::json::array();
    for (const ComparisonRow& row : addon_vs_baseline_tables(result)) {
        tables.push_back({{"detector", row.detector},
                          {"addon", row.addon},
                          {"pairs", row.pairs},
                          {"wins", row.wins},
                          {"draws", row.draws},
                          {"losses", row.losses},
                          {"p_value", row.p_value},
                          {"significant", row.significant}});
    }
    return {{"units", units}, {"references", refs}, {"wilcoxon", tables}};
}

// --- Bench task parsing -------------------------------------------------------------

inline void to_json(nlohmann::json& j, const NoiseSpec& n) {
    switch (n.kind) {
        case NoiseSpec::Kind::None: j = {{"kind", "none"}}; break;
        case NoiseSpec::Kind::UniformFlip: j = {{"kind", "uniform"}, {"rho", n.rho}}; break;
        case NoiseSpec::Kind::Matrix:
            j = {{"kind", "matrix"}, {"transition", matrix_to_json(n.transition)}};
            break;
        case NoiseSpec::Kind::FlipCount:
            j = {{"kind", "flips"}, {"per_class_count", n.per_class_count}};
            break;
    }
}

inline void from_json(const nlohmann::json& j, NoiseSpec& n) {
    const std::string kind = j.value("kind", "none");
    if (kind == "none") {
        n.kind = NoiseSpec::Kind::None;
    } else if (kind == "uniform") {
        n.kind = NoiseSpec::Kind::UniformFlip;
        n.rho = j.at("rho").get<double>();
    } else if (kind == "matrix") {
        n.kind = NoiseSpec::Kind::Matrix;
        n.transition = matrix_from_json(j.at("transition"));
    } else if (kind == "flips") {
        n.kind = NoiseSpec::Kind::FlipCount;
        n.per_class_count = j.at("per_class_count").get<int>();
    } else {
        throw ConfigError("unknown noise kind '" + kind + "'");
    }
}

inline void to_json(nlohmann::json& j, const SplitSpec& s) {
    j = {{"train", s.train_fraction},
         {"validation", s.validation_fraction},
         {"test", s.test_fraction},
         {"calibration_fraction_of_validation", s.calibration_fraction_of_validation},
         {"seed", s.seed}};
}

inline void from_json(const nlohmann::json& j, SplitSpec& s) {
    s.train_fraction = j.value("train", s.train_fraction);
    s.validation_fraction = j.value("validation", s.validation_fraction);
    s.test_fraction = j.value("test", s.test_fraction);
    s.calibration_fraction_of_validation =
        j.value("calibration_fraction_of_validation", s.calibration_fraction_of_validation);
    s.seed = j.value("seed", s.seed);
}

inline void to_json(nlohmann::json& j, const FeatureConfig& f) {
    j = {{"standardize", f.standardize},
         {"use_rff", f.use_rff},
         {"rff_dim", f.rff_dim},
         {"text_columns", f.text_columns},
         {"seed", f.seed}};
}

inline void from_json(const nlohmann::json& j, FeatureConfig& f) {
    f.standardize = j.value("standardize", f.standardize);
    f.use_rff = j.value("use_rff", f.use_rff);
    f.rff_dim = j.value("rff_dim", f.rff_dim);
    if (j.contains("text_columns")) j.at("text_columns").get_to(f.text_columns);
    f.seed = j.value("seed", f.seed);
}

inline void to_json(nlohmann::json& j, const TaskConfig& t) {
    j = {{"name", t.name},
         {"generator", t.generator == TaskConfig::Generator::Blobs ? "blobs" : "two-moons"},
         {"n", t.n},
         {"priors", t.priors},
         {"cluster_std", t.cluster_std},
         {"center_radius", t.center_radius},
         {"dim", t.dim},
         {"minority_fraction", t.minority_fraction},
         {"moons_noise_std", t.moons_noise_std},
         {"noise", t.noise},
         {"split", t.split},
         {"features", t.features},
         {"noisy_calibration", t.noisy_calibration},
         {"calibration_size", t.calibration_size},
         {"seed", t.seed}};
}

inline void from_json(const nlohmann::json& j, TaskConfig& t) {
    t.name = j.value("name", t.name);
    const std::string gen = j.value("generator", "blobs");
    if (gen == "blobs") t.generator = TaskConfig::Generator::Blobs;
    else if (gen == "two-moons" || gen == "two_moons") t.generator = TaskConfig::Generator::TwoMoons;
    else throw ConfigError("unknown generator '" + gen + "'");
    t.n = j.value("n", t.n);
    if (j.contains("priors")) j.at("priors").get_to(t.priors);
    t.cluster_std = j.value("cluster_std", t.cluster_std);
    t.center_radius = j.value("center_radius", t.center_radius);
    t.dim = j.value("dim", t.dim);
    t.minority_fraction = j.value("minority_fraction", t.minority_fraction);
    t.moons_noise_std = j.value("moons_noise_std", t.moons_noise_std);
    if (j.contains("noise")) j.at("noise").get_to(t.noise);
    if (j.contains("split")) j.at("split").get_to(t.split);
    if (j.contains("features")) j.at("features").get_to(t.features);
    t.noisy_calibration = j.value("noisy_calibration", t.noisy_calibration);
    t.calibration_size = j.value("calibration_size", t.calibration_size);
    t.seed = j.value("seed", t.seed);
}

inline void from_json(const nlohmann::json& j, BenchConfig& b) {
    j.at("tasks").get_to(b.tasks);
    if (j.contains("detectors")) j.at("detectors").get_to(b.detectors);
    if (j.contains("addons")) {
        b.addons.clear();
        for (const auto& a : j.at("addons")) b.addons.push_back(addon_from_string(a));
    }
    if (j.contains("seeds")) j.at("seeds").get_to(b.seeds);
    if (j.contains("search")) {
        const auto& s = j.at("search");
        b.search.n_samples = s.value("n_samples", b.search.n_samples);
        if (s.contains("quantiles")) s.at("quantiles").get_to(b.search.quantiles);
    }
    if (j.contains("detector_train")) j.at("detector_train").get_to(b.detector_train);
    b.parallelism = j.value("parallelism", b.parallelism);
    b.compute_gold = j.value("compute_gold", b.compute_gold);
    b.compute_random = j.value("compute_random", b.compute_random);
}

}  // namespace labeltrust
