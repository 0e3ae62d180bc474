#pragma once

// Model-probing mislabel detectors. A detector is a probe (per-example
// measurement on a trained model), an ensembling strategy (checkpoints of one
// training run, independently trained bagged models, or a single model) and
// an aggregation of the probe values into one trust score per training
// example. Higher score = more trusted label. Each ensemble member can be
// wrapped before probing: calibrated on a held-out calibration set (isotonic
// or sigmoid) or passed through the class-mean adjustment.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "labeltrust/calibration.hpp"
#include "labeltrust/errors.hpp"
#include "labeltrust/linear_model.hpp"
#include "labeltrust/rng.hpp"

namespace labeltrust {

enum class Probe { Margin, Confidence, Accuracy, Loss };
enum class EnsembleKind { Progressive, Independent, None };
enum class Aggregation { Sum, MeanOutOfBag, None };
enum class Addon { Baseline, Adjust, Isotonic, Sigmoid };

inline std::string to_string(Probe p) {
    switch (p) {
        case Probe::Margin: return "margin";
        case Probe::Confidence: return "confidence";
        case Probe::Accuracy: return "accuracy";
        case Probe::Loss: return "loss";
    }
    return "?";
}

inline std::string to_string(EnsembleKind e) {
    switch (e) {
        case EnsembleKind::Progressive: return "progressive";
        case EnsembleKind::Independent: return "independent";
        case EnsembleKind::None: return "none";
    }
    return "?";
}

inline std::string to_string(Aggregation a) {
    switch (a) {
        case Aggregation::Sum: return "sum";
        case Aggregation::MeanOutOfBag: return "mean_oob";
        case Aggregation::None: return "none";
    }
    return "?";
}

inline std::string to_string(Addon a) {
    switch (a) {
        case Addon::Baseline: return "baseline";
        case Addon::Adjust: return "adjust";
        case Addon::Isotonic: return "isotonic";
        case Addon::Sigmoid: return "sigmoid";
    }
    return "?";
}

inline Addon addon_from_string(const std::string& s) {
    if (s == "baseline") return Addon::Baseline;
    if (s == "adjust") return Addon::Adjust;
    if (s == "isotonic") return Addon::Isotonic;
    if (s == "sigmoid") return Addon::Sigmoid;
    throw ConfigError("unknown addon '" + s + "'");
}

/// Probe x ensemble x aggregation configuration plus the base-model training
/// recipe. The four named detectors pin their own combination; anything else
/// requires custom = true.
struct DetectorSpec {
    Probe probe = Probe::Margin;
    EnsembleKind ensemble = EnsembleKind::Progressive;
    Aggregation aggregation = Aggregation::Sum;
    Addon addon = Addon::Baseline;
    int bags = 5;               // independent ensembles
    double bag_fraction = 0.632;
    TrainConfig train;
    std::uint64_t seed = 0;
    bool custom = false;
    bool keep_diagnostics = false;

    static DetectorSpec aum() {
        DetectorSpec s;
        s.probe = Probe::Margin;
        s.ensemble = EnsembleKind::Progressive;
        s.aggregation = Aggregation::Sum;
        return s;
    }

    static DetectorSpec cleanlab() {
        DetectorSpec s;
        s.probe = Probe::Confidence;
        s.ensemble = EnsembleKind::Independent;
        s.aggregation = Aggregation::MeanOutOfBag;
        return s;
    }

    static DetectorSpec consensus() {
        DetectorSpec s;
        s.probe = Probe::Accuracy;
        s.ensemble = EnsembleKind::Independent;
        s.aggregation = Aggregation::MeanOutOfBag;
        return s;
    }

    static DetectorSpec small_loss() {
        DetectorSpec s;
        s.probe = Probe::Loss;
        s.ensemble = EnsembleKind::None;
        s.aggregation = Aggregation::None;
        return s;
    }

    static DetectorSpec named(const std::string& name) {
        if (name == "aum") return aum();
        if (name == "cleanlab") return cleanlab();
        if (name == "consensus") return consensus();
        if (name == "small_loss" || name == "small-loss") return small_loss();
        throw ConfigError("unknown detector '" + name + "'");
    }

    std::string name() const {
        if (probe == Probe::Margin && ensemble == EnsembleKind::Progressive &&
            aggregation == Aggregation::Sum)
            return "aum";
        if (probe == Probe::Confidence && ensemble == EnsembleKind::Independent &&
            aggregation == Aggregation::MeanOutOfBag)
            return "cleanlab";
        if (probe == Probe::Accuracy && ensemble == EnsembleKind::Independent &&
            aggregation == Aggregation::MeanOutOfBag)
            return "consensus";
        if (probe == Probe::Loss && ensemble == EnsembleKind::None)
            return "small_loss";
        return "custom(" + to_string(probe) + "," + to_string(ensemble) + "," +
               to_string(aggregation) + ")";
    }

    void validate() const {
        train.validate();
        if (aggregation == Aggregation::MeanOutOfBag && ensemble != EnsembleKind::Independent)
            throw ConfigError("detector: mean_oob aggregation requires an independent ensemble");
        if (ensemble == EnsembleKind::None && aggregation != Aggregation::None)
            throw ConfigError("detector: no-ensemble detectors take no aggregation");
        if (ensemble == EnsembleKind::Independent) {
            if (bags < 2) throw ConfigError("detector: independent ensemble needs B >= 2");
            if (!(bag_fraction > 0.0 && bag_fraction < 1.0))
                throw ConfigError("detector: bag_fraction must lie in (0,1)");
        }
        if (!custom && name().rfind("custom", 0) == 0)
            throw ConfigError("detector: unrecognized combination; set custom = true");
    }
};

/// Held-out data used to calibrate ensemble members before probing.
struct CalibrationData {
    Eigen::MatrixXd X;
    std::vector<int> y;
    bool noisy_labels = false;  // provenance for the noisy-calibration study
};

/// Per-model confidence matrices (post-addon, exactly what the probes saw)
/// and bag memberships; retained only on request for audits and tests.
struct DetectorDiagnostics {
    std::vector<Eigen::MatrixXd> model_confidences;
    std::vector<std::vector<std::uint8_t>> in_bag;  // empty for non-independent ensembles
};

constexpr std::uint8_t kTrustFlagMedianFallback = 1;

struct TrustScores {
    std::vector<double> scores;           // higher = more trusted
    std::vector<int> oob_counts;          // independent ensembles only
    std::vector<std::uint8_t> flags;
    std::string detector;
    Addon addon = Addon::Baseline;
    bool calibration_set_noisy = false;
    std::shared_ptr<DetectorDiagnostics> diagnostics;

    int n() const { return static_cast<int>(scores.size()); }
};

/// Probe value from a row of confidences for observed label y. Loss is
/// returned raw (positive); the scorers negate it for storage.
inline double probe_confidence_row(const Eigen::RowVectorXd& probs, int y, Probe probe) {
    const int C = static_cast<int>(probs.size());
    if (y < 0 || y >= C) throw DataError("probe: label out of range");
    switch (probe) {
        case Probe::Margin: {
            double best_other = -std::numeric_limits<double>::infinity();
            for (int c = 0; c < C; ++c)
                if (c != y) best_other = std::max(best_other, probs(c));
            return probs(y) - best_other;
        }
        case Probe::Confidence:
            return probs(y);
        case Probe::Accuracy: {
            int best = 0;
            for (int c = 1; c < C; ++c)
                if (probs(c) > probs(best)) best = c;
            return best == y ? 1.0 : 0.0;
        }
        case Probe::Loss:
            return -std::log(std::clamp(probs(y), kProbClip, 1.0 - kProbClip));
    }
    throw ConfigError("probe: invalid probe kind");
}

/// Probes one example against a model.
inline double probe_example(const LinearModel& model, const Eigen::RowVectorXd& x, int y,
                            Probe probe) {
    Eigen::MatrixXd probs = model.predict_confidences(x);
    return probe_confidence_row(probs.row(0), y, probe);
}

/// Probe values for every row of a confidence matrix.
inline std::vector<double> probe_confidence_matrix(const Eigen::MatrixXd& probs,
                                                   const std::vector<int>& y, Probe probe) {
    if (static_cast<std::size_t>(probs.rows()) != y.size())
        throw DataError("probe: row/label count mismatch");
    std::vector<double> values(y.size());
    for (std::size_t i = 0; i < y.size(); ++i)
        values[i] = probe_confidence_row(probs.row(static_cast<Eigen::Index>(i)), y[i], probe);
    return values;
}

namespace detail {

// Confidences the probes see: raw, adjusted, or produced by a model
// calibrated on the held-out set.
inline Eigen::MatrixXd addon_confidences(const LinearModel& model, const Eigen::MatrixXd& X,
                                         const std::vector<int>& observed_y,
                                         const CalibrationData* calibration, Addon addon) {
    switch (addon) {
        case Addon::Baseline:
            return model.predict_confidences(X);
        case Addon::Adjust:
            return adjust_confidences(model.predict_confidences(X), observed_y);
        case Addon::Isotonic:
        case Addon::Sigmoid: {
            if (calibration == nullptr || calibration->X.rows() == 0)
                throw ConfigError("detector: addon '" + to_string(addon) +
                                  "' needs a calibration set");
            const auto method = addon == Addon::Isotonic ? CalibrationMethod::Isotonic
                                                         : CalibrationMethod::Sigmoid;
            return calibrate_model(model, calibration->X, calibration->y, method)
                .predict_confidences(X);
        }
    }
    throw ConfigError("detector: invalid addon");
}

// Mean of per-model values over models where the example was out of bag;
// examples that are in every bag get the median of the defined scores.
inline void aggregate_out_of_bag(const std::vector<std::vector<double>>& per_model,
                                 const std::vector<std::vector<std::uint8_t>>& in_bag,
                                 TrustScores& out) {
    const std::size_t n = per_model.at(0).size();
    out.scores.assign(n, 0.0);
    out.oob_counts.assign(n, 0);
    out.flags.assign(n, 0);
    for (std::size_t i = 0; i < n; ++i) {
        double sum = 0.0;
        int count = 0;
        for (std::size_t b = 0; b < per_model.size(); ++b) {
            if (!in_bag[b][i]) {
                sum += per_model[b][i];
                count++;
            }
        }
        out.oob_counts[i] = count;
        out.scores[i] = count > 0 ? sum / count : std::numeric_limits<double>::quiet_NaN();
    }
    std::vector<double> defined;
    for (std::size_t i = 0; i < n; ++i)
        if (out.oob_counts[i] > 0) defined.push_back(out.scores[i]);
    if (defined.empty()) throw NumericError("detector: no example was ever out of bag");
    std::sort(defined.begin(), defined.end());
    const std::size_t mid = defined.size() / 2;
    const double median = defined.size() % 2 == 1
                              ? defined[mid]
                              : 0.5 * (defined[mid - 1] + defined[mid]);
    for (std::size_t i = 0; i < n; ++i) {
        if (out.oob_counts[i] == 0) {
            out.scores[i] = median;
            out.flags[i] = kTrustFlagMedianFallback;
        }
    }
}

}  // namespace detail

/// Runs any probe/ensemble/aggregation/addon combination and returns one
/// trust score per training example. Deterministic in spec.seed; the
/// calibration set is only touched when the addon requires it.
inline TrustScores run_detector(const Eigen::MatrixXd& X, const std::vector<int>& y,
                                int num_classes, const CalibrationData* calibration,
                                const DetectorSpec& spec) {
    spec.validate();
    const int n = static_cast<int>(X.rows());
    if (n < 1) throw DataError("detector: empty training set");
    if (static_cast<std::size_t>(n) != y.size())
        throw DataError("detector: feature rows and label count differ");

    TrustScores out;
    out.detector = spec.name();
    out.addon = spec.addon;
    if ((spec.addon == Addon::Isotonic || spec.addon == Addon::Sigmoid) && calibration)
        out.calibration_set_noisy = calibration->noisy_labels;
    auto diag = spec.keep_diagnostics ? std::make_shared<DetectorDiagnostics>() : nullptr;

    const bool negate = spec.probe == Probe::Loss;  // store with higher = more trusted

    if (spec.ensemble == EnsembleKind::Progressive) {
        TrainConfig cfg = spec.train;
        cfg.seed = derive_seed(spec.seed, 0);
        const SgdResult fit = train_sgd(X, y, num_classes, cfg);
        const int T = fit.trace.checkpoints();
        if (T < 1) throw ConfigError("detector: progressive ensemble produced no checkpoints");
        std::vector<double> sum(static_cast<std::size_t>(n), 0.0);
        for (const LinearModel& snapshot : fit.trace.snapshots) {
            const Eigen::MatrixXd conf =
                detail::addon_confidences(snapshot, X, y, calibration, spec.addon);
            const std::vector<double> values = probe_confidence_matrix(conf, y, spec.probe);
            for (int i = 0; i < n; ++i) sum[static_cast<std::size_t>(i)] += values[i];
            if (diag) diag->model_confidences.push_back(conf);
        }
        out.scores.resize(static_cast<std::size_t>(n));
        for (int i = 0; i < n; ++i) {
            const double mean = sum[static_cast<std::size_t>(i)] / T;
            out.scores[static_cast<std::size_t>(i)] = negate ? -mean : mean;
        }
        out.flags.assign(static_cast<std::size_t>(n), 0);
    } else if (spec.ensemble == EnsembleKind::Independent) {
        const int bag_size = std::max(1, static_cast<int>(std::floor(spec.bag_fraction * n)));
        std::vector<std::vector<double>> per_model;
        std::vector<std::vector<std::uint8_t>> in_bag;
        for (int b = 0; b < spec.bags; ++b) {
            Rng rng = make_rng(derive_seed(spec.seed, 100 + static_cast<std::uint64_t>(b)));
            std::vector<int> indices(static_cast<std::size_t>(n));
            std::iota(indices.begin(), indices.end(), 0);
            std::shuffle(indices.begin(), indices.end(), rng);
            indices.resize(static_cast<std::size_t>(bag_size));

            Eigen::MatrixXd bag_x(bag_size, X.cols());
            std::vector<int> bag_y(static_cast<std::size_t>(bag_size));
            std::vector<std::uint8_t> membership(static_cast<std::size_t>(n), 0);
            for (int k = 0; k < bag_size; ++k) {
                bag_x.row(k) = X.row(indices[static_cast<std::size_t>(k)]);
                bag_y[static_cast<std::size_t>(k)] = y[indices[static_cast<std::size_t>(k)]];
                membership[indices[static_cast<std::size_t>(k)]] = 1;
            }
            TrainConfig cfg = spec.train;
            cfg.seed = derive_seed(spec.seed, 200 + static_cast<std::uint64_t>(b));
            const SgdResult fit = train_sgd(bag_x, bag_y, num_classes, cfg);
            const Eigen::MatrixXd conf =
                detail::addon_confidences(fit.model, X, y, calibration, spec.addon);
            std::vector<double> values = probe_confidence_matrix(conf, y, spec.probe);
            if (negate)
                for (double& v : values) v = -v;
            per_model.push_back(std::move(values));
            in_bag.push_back(membership);
            if (diag) {
                diag->model_confidences.push_back(conf);
                diag->in_bag.push_back(std::move(membership));
            }
        }
        detail::aggregate_out_of_bag(per_model, in_bag, out);
    } else {  // EnsembleKind::None
        TrainConfig cfg = spec.train;
        cfg.seed = derive_seed(spec.seed, 0);
        const SgdResult fit = train_sgd(X, y, num_classes, cfg);
        const Eigen::MatrixXd conf =
            detail::addon_confidences(fit.model, X, y, calibration, spec.addon);
        std::vector<double> values = probe_confidence_matrix(conf, y, spec.probe);
        out.scores.resize(values.size());
        for (std::size_t i = 0; i < values.size(); ++i)
            out.scores[i] = negate ? -values[i] : values[i];
        out.flags.assign(values.size(), 0);
        if (diag) diag->model_confidences.push_back(conf);
    }

    for (double v : out.scores)
        if (!std::isfinite(v)) throw NumericError("detector: non-finite trust score");
    out.diagnostics = std::move(diag);
    return out;
}

/// Margin probed at every checkpoint of one training run, averaged.
inline TrustScores score_aum(const Eigen::MatrixXd& X, const std::vector<int>& y, int num_classes,
                             const CalibrationData* calibration, DetectorSpec spec) {
    spec.probe = Probe::Margin;
    spec.ensemble = EnsembleKind::Progressive;
    spec.aggregation = Aggregation::Sum;
    return run_detector(X, y, num_classes, calibration, spec);
}

/// Out-of-bag mean confidence in the observed label over bagged models.
inline TrustScores score_cleanlab(const Eigen::MatrixXd& X, const std::vector<int>& y,
                                  int num_classes, const CalibrationData* calibration,
                                  DetectorSpec spec) {
    spec.probe = Probe::Confidence;
    spec.ensemble = EnsembleKind::Independent;
    spec.aggregation = Aggregation::MeanOutOfBag;
    return run_detector(X, y, num_classes, calibration, spec);
}

/// Fraction of out-of-bag models whose prediction agrees with the label.
inline TrustScores score_consensus(const Eigen::MatrixXd& X, const std::vector<int>& y,
                                   int num_classes, const CalibrationData* calibration,
                                   DetectorSpec spec) {
    spec.probe = Probe::Accuracy;
    spec.ensemble = EnsembleKind::Independent;
    spec.aggregation = Aggregation::MeanOutOfBag;
    return run_detector(X, y, num_classes, calibration, spec);
}

/// Per-example log loss of a single model trained on the whole set, negated.
inline TrustScores score_small_loss(const Eigen::MatrixXd& X, const std::vector<int>& y,
                                    int num_classes, const CalibrationData* calibration,
                                    DetectorSpec spec) {
    spec.probe = Probe::Loss;
    spec.ensemble = EnsembleKind::None;
    spec.aggregation = Aggregation::None;
    return run_detector(X, y, num_classes, calibration, spec);
}

// --- JSON round trip for DetectorSpec ----------------------------------------

inline void to_json(nlohmann::json& j, const DetectorSpec& s) {
    j = {{"probe", to_string(s.probe)},
         {"ensemble", to_string(s.ensemble)},
         {"aggregation", to_string(s.aggregation)},
         {"addon", to_string(s.addon)},
         {"bags", s.bags},
         {"bag_fraction", s.bag_fraction},
         {"train", s.train},
         {"seed", s.seed},
         {"custom", s.custom}};
}

inline void from_json(const nlohmann::json& j, DetectorSpec& s) {
    const std::string probe = j.value("probe", "margin");
    if (probe == "margin") s.probe = Probe::Margin;
    else if (probe == "confidence") s.probe = Probe::Confidence;
    else if (probe == "accuracy") s.probe = Probe::Accuracy;
    else if (probe == "loss") s.probe = Probe::Loss;
    else throw ConfigError("unknown probe '" + probe + "'");
    const std::string ensemble = j.value("ensemble", "progressive");
    if (ensemble == "progressive") s.ensemble = EnsembleKind::Progressive;
    else if (ensemble == "independent") s.ensemble = EnsembleKind::Independent;
    else if (ensemble == "none") s.ensemble = EnsembleKind::None;
    else throw ConfigError("unknown ensemble '" + ensemble + "'");
    const std::string aggregation = j.value("aggregation", "sum");
    if (aggregation == "sum") s.aggregation = Aggregation::Sum;
    else if (aggregation == "mean_oob") s.aggregation = Aggregation::MeanOutOfBag;
    else if (aggregation == "none") s.aggregation = Aggregation::None;
    else throw ConfigError("unknown aggregation '" + aggregation + "'");
    s.addon = addon_from_string(j.value("addon", "baseline"));
    s.bags = j.value("bags", s.bags);
    s.bag_fraction = j.value("bag_fraction", s.bag_fraction);
    if (j.contains("train")) j.at("train").get_to(s.train);
    s.seed = j.value("seed", s.seed);
    s.custom = j.value("custom", s.custom);
}

}  // namespace labeltrust
