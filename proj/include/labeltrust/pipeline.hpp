#pragma once

// The detection => filtering => training benchmark. A Task holds the
// transformed feature matrices of a noisy train partition plus clean
// validation / calibration / test partitions. Pipelines filter the train set
// by trust-score quantile, train a final classifier and report clean-test
// metrics, normalized between the silver (perfectly filtered) and none
// (unfiltered) references.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "labeltrust/dataset.hpp"
#include "labeltrust/detect.hpp"
#include "labeltrust/errors.hpp"
#include "labeltrust/features.hpp"
#include "labeltrust/linear_model.hpp"
#include "labeltrust/stats.hpp"

namespace labeltrust {

// --- Task construction --------------------------------------------------------

struct NoiseSpec {
    enum class Kind { None, UniformFlip, Matrix, FlipCount };
    Kind kind = Kind::None;
    double rho = 0.0;          // UniformFlip
    Matrix transition;         // Matrix
    int per_class_count = 0;   // FlipCount

    Dataset apply(const Dataset& clean, std::uint64_t seed) const {
        switch (kind) {
            case Kind::None:
                return clean;
            case Kind::UniformFlip:
                return apply_transition_noise(
                    clean, NoiseTransitionMatrix::uniform_flip(clean.num_classes, rho), seed);
            case Kind::Matrix: {
                NoiseTransitionMatrix T;
                T.entries = transition;
                T.kind = NoiseKind::NAR;
                return apply_transition_noise(clean, T, seed);
            }
            case Kind::FlipCount:
                return flip_labels(clean, per_class_count, seed);
        }
        throw ConfigError("noise: invalid kind");
    }
};

struct TaskConfig {
    std::string name = "task";
    enum class Generator { Blobs, TwoMoons } generator = Generator::Blobs;
    int n = 800;
    // blobs
    std::vector<double> priors = {0.5, 0.5};
    double cluster_std = 1.0;
    double center_radius = 3.0;
    int dim = 2;
    // two-moons
    double minority_fraction = 0.1;
    double moons_noise_std = 0.15;

    NoiseSpec noise;
    SplitSpec split = {0.64, 0.16, 0.2, 0.5, 0};
    FeatureConfig features;
    bool noisy_calibration = false;  // corrupt the calibration partition too
    int calibration_size = 0;        // 0 = whole partition; else stratified subsample
    std::uint64_t seed = 0;
};

/// Materialized benchmark task: transformed matrices per partition. Only the
/// train partition carries label noise (and optionally calibration).
struct Task {
    std::string name;
    int C = 0;
    Matrix train_x;
    std::vector<int> train_y;                  // observed (noisy)
    std::vector<int> train_true;               // ground truth, empty when unknown
    std::vector<std::uint8_t> train_mask;      // 1 = mislabeled, empty when unknown
    Matrix val_x;
    std::vector<int> val_y;
    Matrix cal_x;
    std::vector<int> cal_y;
    bool cal_noisy = false;
    Matrix test_x;
    std::vector<int> test_y;
    FeaturePipeline features;
    // Row indices into the source dataset, for manifests.
    std::vector<int> train_indices, validation_indices, calibration_indices, test_indices;

    int train_n() const { return static_cast<int>(train_y.size()); }

    CalibrationData calibration() const { return {cal_x, cal_y, cal_noisy}; }
};

namespace detail {

inline std::vector<int> stratified_subsample(const std::vector<int>& labels, int target,
                                             std::uint64_t seed) {
    const int n = static_cast<int>(labels.size());
    if (target >= n) {
        std::vector<int> all(n);
        std::iota(all.begin(), all.end(), 0);
        return all;
    }
    int C = 0;
    for (int y : labels) C = std::max(C, y + 1);
    std::vector<std::vector<int>> per_class(static_cast<std::size_t>(C));
    for (int i = 0; i < n; ++i) per_class[static_cast<std::size_t>(labels[i])].push_back(i);
    std::vector<int> chosen;
    // Largest-remainder over class sizes, minimum one per non-empty class when room allows.
    std::vector<int> take(static_cast<std::size_t>(C), 0);
    int assigned = 0;
    std::vector<std::pair<double, int>> rema;
    for (int c = 0; c < C; ++c) {
        const double share = target * static_cast<double>(per_class[c].size()) / n;
        take[c] = std::min<int>(static_cast<int>(std::floor(share)),
                                static_cast<int>(per_class[c].size()));
        assigned += take[c];
        rema.push_back({share - std::floor(share), c});
    }
    std::sort(rema.begin(), rema.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return a.second < b.second;
    });
    for (const auto& [_, c] : rema) {
        if (assigned >= target) break;
        if (take[c] < static_cast<int>(per_class[c].size())) {
            take[c]++;
            assigned++;
        }
    }
    for (int c = 0; c < C; ++c) {
        auto members = per_class[static_cast<std::size_t>(c)];
        Rng rng = make_rng(derive_seed(seed, 7000 + static_cast<std::uint64_t>(c)));
        std::shuffle(members.begin(), members.end(), rng);
        for (int k = 0; k < take[c]; ++k) chosen.push_back(members[static_cast<std::size_t>(k)]);
    }
    std::sort(chosen.begin(), chosen.end());
    return chosen;
}

}  // namespace detail

/// Builds a Task from an already-generated clean dataset: split first, then
/// corrupt the train partition (and the calibration partition when asked), so
/// validation and test labels stay clean. Features are fitted on the train
/// partition only.
inline Task build_task_from(const Dataset& clean, const TaskConfig& config) {
    SplitSpec split_spec = config.split;
    split_spec.seed = derive_seed(config.seed, 1);
    const Split split = split_dataset(clean, split_spec);

    Dataset noisy_train = config.noise.apply(split.train, derive_seed(config.seed, 2));
    Dataset calibration = split.calibration;
    if (config.noisy_calibration)
        calibration = config.noise.apply(calibration, derive_seed(config.seed, 3));
    if (config.calibration_size > 0 && calibration.n() > config.calibration_size) {
        const auto keep = detail::stratified_subsample(
            calibration.observed_labels, config.calibration_size, derive_seed(config.seed, 4));
        calibration = calibration.subset(keep);
    }

    FeatureConfig feature_config = config.features;
    feature_config.seed = derive_seed(config.seed, 5);
    FeaturePipeline features = fit_feature_pipeline(noisy_train, feature_config);

    Task task;
    task.name = config.name;
    task.C = clean.num_classes;
    task.train_x = features.transform(noisy_train);
    task.train_y = noisy_train.observed_labels;
    if (noisy_train.true_labels) task.train_true = *noisy_train.true_labels;
    if (noisy_train.mislabel_mask) task.train_mask = *noisy_train.mislabel_mask;
    task.val_x = features.transform(split.validation);
    task.val_y = split.validation.observed_labels;
    task.cal_x = features.transform(calibration);
    task.cal_y = calibration.observed_labels;
    task.cal_noisy = config.noisy_calibration;
    task.test_x = features.transform(split.test);
    task.test_y = split.test.observed_labels;
    task.features = std::move(features);
    task.train_indices = split.train_indices;
    task.validation_indices = split.validation_indices;
    task.calibration_indices = split.calibration_indices;
    task.test_indices = split.test_indices;
    return task;
}

inline Dataset generate_dataset(const TaskConfig& config) {
    if (config.generator == TaskConfig::Generator::TwoMoons)
        return make_two_moons(config.n, config.minority_fraction, config.moons_noise_std,
                              derive_seed(config.seed, 0));
    return make_blobs(config.n, config.priors, config.cluster_std, derive_seed(config.seed, 0),
                      config.dim, config.center_radius);
}

inline Task build_task(const TaskConfig& config) {
    return build_task_from(generate_dataset(config), config);
}

// --- Filtering -----------------------------------------------------------------

/// Indices that survive removing the floor(q*n) lowest-trust examples. Ties
/// at the cutoff break by original index (lower index removed first);
/// survivor order is preserved.
inline std::vector<int> filter_indices(const std::vector<double>& scores, double q) {
    if (!(q >= 0.0 && q < 1.0)) throw ConfigError("filter: quantile must lie in [0,1)");
    const int n = static_cast<int>(scores.size());
    const int remove = static_cast<int>(std::floor(q * n));
    std::vector<int> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int a, int b) {
        if (scores[static_cast<std::size_t>(a)] != scores[static_cast<std::size_t>(b)])
            return scores[static_cast<std::size_t>(a)] < scores[static_cast<std::size_t>(b)];
        return a < b;
    });
    std::vector<std::uint8_t> removed(static_cast<std::size_t>(n), 0);
    for (int k = 0; k < remove; ++k) removed[static_cast<std::size_t>(order[k])] = 1;
    std::vector<int> survivors;
    survivors.reserve(static_cast<std::size_t>(n - remove));
    for (int i = 0; i < n; ++i)
        if (!removed[static_cast<std::size_t>(i)]) survivors.push_back(i);
    if (survivors.empty()) throw DataError("filter: all examples removed");
    return survivors;
}

/// Dataset-level filtering by trust scores.
inline Dataset filter_by_trust(const Dataset& dataset, const TrustScores& scores, double q) {
    if (scores.n() != dataset.n()) throw DataError("filter: score count differs from dataset");
    return dataset.subset(filter_indices(scores.scores, q));
}

// --- Scoring -------------------------------------------------------------------

/// 100 + 100 * (method - silver) / (none - silver): silver maps to 100, none
/// to 200. Values outside [100, 200] are possible.
inline double normalize_score(double method_loss, double none_loss, double silver_loss) {
    const double span = none_loss - silver_loss;
    if (std::abs(span) < 1e-12)
        throw NumericError("normalize_score: degenerate references (none == silver)");
    return 100.0 + 100.0 * (method_loss - silver_loss) / span;
}

struct PipelineResult {
    std::string task;
    std::string detector;
    Addon addon = Addon::Baseline;
    double q = 0.0;
    double test_log_loss = std::numeric_limits<double>::quiet_NaN();
    double test_balanced_accuracy = std::numeric_limits<double>::quiet_NaN();
    double normalized_score = std::numeric_limits<double>::quiet_NaN();
    double validation_log_loss = std::numeric_limits<double>::quiet_NaN();
    double validation_balanced_accuracy = std::numeric_limits<double>::quiet_NaN();
    int filtered_size = 0;
    std::vector<int> kept_indices;  // surviving train indices
    double detector_lr = 0.0, detector_l2 = 0.0;
    double final_lr = 0.0, final_l2 = 0.0;
    std::uint64_t seed = 0;
    std::string status = "ok";
};

namespace detail {

struct FinalFit {
    LinearModel model;
    double val_loss = std::numeric_limits<double>::infinity();
    double val_bacc = 0.0;
};

inline FinalFit train_final(const Task& task, const std::vector<int>& keep,
                            const TrainConfig& config) {
    Matrix X(static_cast<Eigen::Index>(keep.size()), task.train_x.cols());
    std::vector<int> y(keep.size());
    for (std::size_t k = 0; k < keep.size(); ++k) {
        X.row(static_cast<Eigen::Index>(k)) = task.train_x.row(keep[k]);
        y[k] = task.train_y[static_cast<std::size_t>(keep[k])];
    }
    FinalFit fit;
    fit.model = train_sgd(X, y, task.C, config).model;
    const Matrix val_probs = fit.model.predict_confidences(task.val_x);
    fit.val_loss = log_loss_metric(val_probs, task.val_y);
    fit.val_bacc = balanced_accuracy_metric(fit.model.predict(task.val_x), task.val_y);
    return fit;
}

inline bool has_two_classes(const std::vector<int>& y) {
    for (std::size_t i = 1; i < y.size(); ++i)
        if (y[i] != y[0]) return true;
    return false;
}

inline std::vector<int> labels_at(const std::vector<int>& y, const std::vector<int>& idx) {
    std::vector<int> out(idx.size());
    for (std::size_t k = 0; k < idx.size(); ++k) out[k] = y[static_cast<std::size_t>(idx[k])];
    return out;
}

}  // namespace detail

/// One full pipeline: filter the noisy train set at quantile q using the
/// given trust scores, train the final classifier, evaluate on the clean
/// test set. Degenerate filtered sets (empty or single-class) produce a
/// failed result with status "degenerate" instead of throwing.
inline PipelineResult run_pipeline_with_scores(const Task& task, const TrustScores& scores,
                                               double q, const TrainConfig& final_config) {
    PipelineResult result;
    result.task = task.name;
    result.q = q;
    result.final_lr = final_config.learning_rate;
    result.final_l2 = final_config.l2;

    std::vector<int> keep;
    try {
        keep = filter_indices(scores.scores, q);
    } catch (const DataError&) {
        result.status = "degenerate";
        result.validation_log_loss = std::numeric_limits<double>::infinity();
        return result;
    }
    result.filtered_size = static_cast<int>(keep.size());
    result.kept_indices = keep;
    const std::vector<int> kept_labels = detail::labels_at(task.train_y, keep);
    if (!detail::has_two_classes(kept_labels)) {
        result.status = "degenerate";
        result.validation_log_loss = std::numeric_limits<double>::infinity();
        return result;
    }
    const detail::FinalFit fit = detail::train_final(task, keep, final_config);
    result.validation_log_loss = fit.val_loss;
    result.validation_balanced_accuracy = fit.val_bacc;
    const Matrix test_probs = fit.model.predict_confidences(task.test_x);
    result.test_log_loss = log_loss_metric(test_probs, task.test_y);
    result.test_balanced_accuracy =
        balanced_accuracy_metric(fit.model.predict(task.test_x), task.test_y);
    return result;
}

// --- References ----------------------------------------------------------------

enum class ReferenceKind { None, Random, Silver, Gold };

inline std::string to_string(ReferenceKind k) {
    switch (k) {
        case ReferenceKind::None: return "none";
        case ReferenceKind::Random: return "random";
        case ReferenceKind::Silver: return "silver";
        case ReferenceKind::Gold: return "gold";
    }
    return "?";
}

/// Reference pipelines: none = unfiltered noisy train set; random = uniform
/// trust scores plus the standard quantile sweep (selected on validation
/// loss); silver = the correctly-labeled subset only; gold = all examples
/// with their true labels.
inline PipelineResult run_reference(ReferenceKind kind, const Task& task,
                                    const TrainConfig& final_config, std::uint64_t seed,
                                    const std::vector<double>& quantiles = {
                                        0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9}) {
    PipelineResult result;
    result.task = task.name;
    result.detector = to_string(kind);
    result.seed = seed;
    result.final_lr = final_config.learning_rate;
    result.final_l2 = final_config.l2;

    const int n = task.train_n();
    std::vector<int> keep;
    std::vector<int> labels;
    const std::vector<int>* label_source = &task.train_y;

    switch (kind) {
        case ReferenceKind::None: {
            keep.resize(static_cast<std::size_t>(n));
            std::iota(keep.begin(), keep.end(), 0);
            break;
        }
        case ReferenceKind::Random: {
            Rng rng = make_rng(derive_seed(seed, 0xAB));
            std::uniform_real_distribution<double> unif(0.0, 1.0);
            std::vector<double> scores(static_cast<std::size_t>(n));
            for (double& s : scores) s = unif(rng);
            TrustScores trust;
            trust.scores = std::move(scores);
            trust.detector = "random";
            PipelineResult best;
            best.validation_log_loss = std::numeric_limits<double>::infinity();
            for (double q : quantiles) {
                PipelineResult candidate = run_pipeline_with_scores(task, trust, q, final_config);
                if (candidate.status == "ok" &&
                    candidate.validation_log_loss < best.validation_log_loss)
                    best = candidate;
            }
            if (!std::isfinite(best.validation_log_loss))
                throw NumericError("reference: random sweep produced no usable pipeline");
            best.task = task.name;
            best.detector = "random";
            best.seed = seed;
            return best;
        }
        case ReferenceKind::Silver: {
            if (task.train_mask.empty())
                throw ConfigError("reference: silver needs a mislabel mask");
            for (int i = 0; i < n; ++i)
                if (!task.train_mask[static_cast<std::size_t>(i)]) keep.push_back(i);
            if (keep.empty()) throw DataError("reference: silver set is empty");
            break;
        }
        case ReferenceKind::Gold: {
            if (task.train_true.empty())
                throw ConfigError("reference: gold needs true labels");
            keep.resize(static_cast<std::size_t>(n));
            std::iota(keep.begin(), keep.end(), 0);
            label_source = &task.train_true;
            break;
        }
    }

    Matrix X(static_cast<Eigen::Index>(keep.size()), task.train_x.cols());
    labels.resize(keep.size());
    for (std::size_t k = 0; k < keep.size(); ++k) {
        X.row(static_cast<Eigen::Index>(k)) = task.train_x.row(keep[k]);
        labels[k] = (*label_source)[static_cast<std::size_t>(keep[k])];
    }
    const LinearModel model = train_sgd(X, labels, task.C, final_config).model;
    result.filtered_size = static_cast<int>(keep.size());
    result.kept_indices = keep;
    const Matrix val_probs = model.predict_confidences(task.val_x);
    result.validation_log_loss = log_loss_metric(val_probs, task.val_y);
    const Matrix test_probs = model.predict_confidences(task.test_x);
    result.test_log_loss = log_loss_metric(test_probs, task.test_y);
    result.test_balanced_accuracy =
        balanced_accuracy_metric(model.predict(task.test_x), task.test_y);
    return result;
}

// --- Random search ---------------------------------------------------------------

struct SearchSpace {
    double lr_min = 1e-3, lr_max = 1.0;   // learning rate, log-uniform
    double l2_min = 1e-5, l2_max = 1e-1;  // L2 regularization, log-uniform
};

struct SearchConfig {
    int n_samples = 160;
    std::vector<double> quantiles = {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9};
    SearchSpace space;
    enum class Selection { ValidationLogLoss, ValidationBalancedAccuracy };
    Selection selection = Selection::ValidationLogLoss;
};

struct TrialRow {
    int trial = 0;
    int sample = 0;
    double q = 0.0;
    double detector_lr = 0.0, detector_l2 = 0.0;
    double final_lr = 0.0, final_l2 = 0.0;
    double val_loss = std::numeric_limits<double>::infinity();
    double val_bacc = 0.0;
    int filtered_size = 0;
    std::string status = "ok";
};

struct SearchResult {
    PipelineResult best;
    TrialRow best_row;
    std::vector<TrialRow> trials;
};

inline double log_uniform(Rng& rng, double lo, double hi) {
    std::uniform_real_distribution<double> unif(std::log(lo), std::log(hi));
    return std::exp(unif(rng));
}

/// Index of the winning trial: minimum validation loss (or maximum balanced
/// accuracy), ties by lower quantile then lower trial index.
inline std::size_t select_best_trial(const std::vector<TrialRow>& trials,
                                     SearchConfig::Selection selection =
                                         SearchConfig::Selection::ValidationLogLoss) {
    if (trials.empty()) throw ConfigError("search: no trials");
    std::size_t best = trials.size();
    for (std::size_t i = 0; i < trials.size(); ++i) {
        if (trials[i].status != "ok") continue;
        if (best == trials.size()) {
            best = i;
            continue;
        }
        const TrialRow& cand = trials[i];
        const TrialRow& cur = trials[best];
        bool better;
        if (selection == SearchConfig::Selection::ValidationLogLoss) {
            better = cand.val_loss < cur.val_loss ||
                     (cand.val_loss == cur.val_loss && cand.q < cur.q);
        } else {
            better = cand.val_bacc > cur.val_bacc ||
                     (cand.val_bacc == cur.val_bacc && cand.q < cur.q);
        }
        if (better) best = i;
    }
    if (best == trials.size()) throw NumericError("search: every trial failed");
    return best;
}

/// Random search over detector-model and final-classifier (learning rate, L2)
/// pairs, each crossed with the quantile grid. The detector runs once per
/// sample; selection uses the clean validation set.
inline SearchResult random_search(const Task& task, const DetectorSpec& detector_template,
                                  const SearchConfig& config, std::uint64_t seed) {
    if (config.n_samples < 1) throw ConfigError("search: n_samples must be >= 1");
    SearchResult result;
    const CalibrationData calibration = task.calibration();
    const bool needs_calibration =
        detector_template.addon == Addon::Isotonic || detector_template.addon == Addon::Sigmoid;

    std::vector<TrustScores> sample_scores(static_cast<std::size_t>(config.n_samples));
    std::vector<std::array<double, 4>> sample_params(static_cast<std::size_t>(config.n_samples));

    int trial_index = 0;
    for (int s = 0; s < config.n_samples; ++s) {
        Rng rng = make_rng(derive_seed(seed, 10 + static_cast<std::uint64_t>(s)));
        const double det_lr = log_uniform(rng, config.space.lr_min, config.space.lr_max);
        const double det_l2 = log_uniform(rng, config.space.l2_min, config.space.l2_max);
        const double fin_lr = log_uniform(rng, config.space.lr_min, config.space.lr_max);
        const double fin_l2 = log_uniform(rng, config.space.l2_min, config.space.l2_max);
        sample_params[static_cast<std::size_t>(s)] = {det_lr, det_l2, fin_lr, fin_l2};

        DetectorSpec spec = detector_template;
        spec.train.learning_rate = det_lr;
        spec.train.l2 = det_l2;
        spec.seed = derive_seed(seed, 1000 + static_cast<std::uint64_t>(s));
        TrustScores scores;
        std::string detector_status = "ok";
        try {
            scores = run_detector(task.train_x, task.train_y, task.C,
                                  needs_calibration ? &calibration : nullptr, spec);
        } catch (const NumericError& e) {
            detector_status = std::string("detector_failed: ") + e.what();
        }
        sample_scores[static_cast<std::size_t>(s)] = scores;

        for (double q : config.quantiles) {
            TrialRow row;
            row.trial = trial_index++;
            row.sample = s;
            row.q = q;
            row.detector_lr = det_lr;
            row.detector_l2 = det_l2;
            row.final_lr = fin_lr;
            row.final_l2 = fin_l2;
            if (detector_status != "ok") {
                row.status = detector_status;
                result.trials.push_back(row);
                continue;
            }
            TrainConfig final_config;
            final_config.learning_rate = fin_lr;
            final_config.l2 = fin_l2;
            final_config.seed = derive_seed(seed, 5000 + static_cast<std::uint64_t>(s));
            PipelineResult pipeline;
            try {
                pipeline = run_pipeline_with_scores(task, scores, q, final_config);
            } catch (const NumericError& e) {
                row.status = std::string("train_failed: ") + e.what();
                result.trials.push_back(row);
                continue;
            }
            row.val_loss = pipeline.validation_log_loss;
            row.val_bacc = std::isfinite(pipeline.validation_balanced_accuracy)
                               ? pipeline.validation_balanced_accuracy
                               : 0.0;
            row.filtered_size = pipeline.filtered_size;
            row.status = pipeline.status;
            result.trials.push_back(row);
        }
    }

    const std::size_t winner = select_best_trial(result.trials, config.selection);
    const TrialRow& best_row = result.trials[winner];
    result.best_row = best_row;

    TrainConfig final_config;
    final_config.learning_rate = best_row.final_lr;
    final_config.l2 = best_row.final_l2;
    final_config.seed = derive_seed(seed, 5000 + static_cast<std::uint64_t>(best_row.sample));
    result.best = run_pipeline_with_scores(
        task, sample_scores[static_cast<std::size_t>(best_row.sample)], best_row.q, final_config);
    result.best.task = task.name;
    result.best.detector = detector_template.name();
    result.best.addon = detector_template.addon;
    result.best.detector_lr = best_row.detector_lr;
    result.best.detector_l2 = best_row.detector_l2;
    result.best.seed = seed;
    return result;
}

// --- Minority-removal curve -------------------------------------------------------

struct MinorityCurve {
    std::vector<std::pair<double, double>> points;  // (fraction removed, minority fraction removed)
    double area_above_diagonal = 0.0;
    bool has_minority = true;
};

/// Sweeps removal from lowest to highest trust and tracks the fraction of
/// minority-class examples (class prior < 1/C) removed. Also integrates the
/// gap to the diagonal.
inline MinorityCurve minority_removal_curve(const std::vector<double>& scores,
                                            const std::vector<int>& labels, int C) {
    if (scores.size() != labels.size()) throw DataError("minority_curve: length mismatch");
    if (scores.empty()) throw DataError("minority_curve: empty input");
    const int n = static_cast<int>(scores.size());
    std::vector<double> priors(static_cast<std::size_t>(C), 0.0);
    for (int y : labels) priors.at(static_cast<std::size_t>(y)) += 1.0 / n;

    std::vector<std::uint8_t> minority(static_cast<std::size_t>(C), 0);
    int total_minority = 0;
    for (int c = 0; c < C; ++c)
        minority[static_cast<std::size_t>(c)] = priors[static_cast<std::size_t>(c)] < 1.0 / C;
    for (int i = 0; i < n; ++i)
        total_minority += minority[static_cast<std::size_t>(labels[static_cast<std::size_t>(i)])];

    MinorityCurve curve;
    if (total_minority == 0) {
        curve.has_minority = false;
        return curve;
    }

    std::vector<int> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int a, int b) {
        if (scores[static_cast<std::size_t>(a)] != scores[static_cast<std::size_t>(b)])
            return scores[static_cast<std::size_t>(a)] < scores[static_cast<std::size_t>(b)];
        return a < b;
    });

    curve.points.push_back({0.0, 0.0});
    int removed_minority = 0;
    double area = 0.0;
    double prev_x = 0.0, prev_y = 0.0;
    for (int k = 0; k < n; ++k) {
        removed_minority +=
            minority[static_cast<std::size_t>(labels[static_cast<std::size_t>(order[k])])];
        const double x = static_cast<double>(k + 1) / n;
        const double y = static_cast<double>(removed_minority) / total_minority;
        curve.points.push_back({x, y});
        area += 0.5 * ((y + prev_y) - (x + prev_x)) * (x - prev_x);
        prev_x = x;
        prev_y = y;
    }
    curve.area_above_diagonal = area;
    return curve;
}

// --- Single three-stage run ---------------------------------------------------------

struct PipelineConfig {
    TaskConfig task;
    DetectorSpec detector;
    double q = 0.1;
    TrainConfig final_config;
    std::uint64_t master_seed = 0;
    bool compute_references = true;
};

/// detection => filtering => training for one configuration, with none and
/// silver references trained under the same final configuration to produce
/// the normalized score.
inline PipelineResult run_three_stage(const PipelineConfig& config) {
    TaskConfig task_config = config.task;
    task_config.seed = derive_seed(config.master_seed, 1);
    const Task task = build_task(task_config);

    DetectorSpec spec = config.detector;
    spec.seed = derive_seed(config.master_seed, 2);
    const CalibrationData calibration = task.calibration();
    const bool needs_calibration = spec.addon == Addon::Isotonic || spec.addon == Addon::Sigmoid;
    const TrustScores scores = run_detector(task.train_x, task.train_y, task.C,
                                            needs_calibration ? &calibration : nullptr, spec);

    TrainConfig final_config = config.final_config;
    final_config.seed = derive_seed(config.master_seed, 3);
    PipelineResult result = run_pipeline_with_scores(task, scores, config.q, final_config);
    result.detector = spec.name();
    result.addon = spec.addon;
    result.detector_lr = spec.train.learning_rate;
    result.detector_l2 = spec.train.l2;
    result.seed = config.master_seed;

    if (config.compute_references && result.status == "ok" && !task.train_mask.empty()) {
        const PipelineResult none =
            run_reference(ReferenceKind::None, task, final_config, derive_seed(config.master_seed, 4));
        const PipelineResult silver =
            run_reference(ReferenceKind::Silver, task, final_config, derive_seed(config.master_seed, 5));
        try {
            result.normalized_score =
                normalize_score(result.test_log_loss, none.test_log_loss, silver.test_log_loss);
        } catch (const NumericError&) {
            // references collapsed; normalized score stays NaN
        }
    }
    return result;
}

}  // namespace labeltrust
