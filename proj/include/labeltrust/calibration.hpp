#pragma once

// Post-hoc calibration: isotonic regression via pool-adjacent-violators,
// Platt scaling, a one-vs-rest calibrated-model wrapper, the classwise
// calibration error metric, reliability-diagram binning, and the competing
// class-mean adjustment transform.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "labeltrust/errors.hpp"
#include "labeltrust/linear_model.hpp"

namespace labeltrust {

/// Monotone map fitted by pool-adjacent-violators; evaluation is linear
/// interpolation between breakpoints, clamped at both ends.
struct IsotonicMap {
    std::vector<double> breakpoints;  // strictly increasing
    std::vector<double> values;       // non-decreasing, in [0,1]

    /// Least-squares monotone fit of outcomes against confidences. Ties in
    /// confidence are pre-averaged into a single weighted point.
    static IsotonicMap fit(const std::vector<double>& confidences,
                           const std::vector<double>& outcomes) {
        if (confidences.size() != outcomes.size())
            throw DataError("isotonic: input length mismatch");
        if (confidences.empty()) throw DataError("isotonic: empty input");

        std::vector<std::size_t> order(confidences.size());
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            return confidences[a] < confidences[b];
        });

        // Collapse duplicate confidences.
        std::vector<double> xs, ys, ws;
        for (std::size_t k = 0; k < order.size(); ++k) {
            const double x = confidences[order[k]];
            const double y = outcomes[order[k]];
            if (!xs.empty() && xs.back() == x) {
                ys.back() = (ys.back() * ws.back() + y) / (ws.back() + 1.0);
                ws.back() += 1.0;
            } else {
                xs.push_back(x);
                ys.push_back(y);
                ws.push_back(1.0);
            }
        }

        // Pool adjacent violators. Blocks carry (value, weight, extent).
        std::vector<double> value, weight;
        std::vector<std::size_t> extent;  // number of x points covered
        for (std::size_t k = 0; k < xs.size(); ++k) {
            value.push_back(ys[k]);
            weight.push_back(ws[k]);
            extent.push_back(1);
            while (value.size() >= 2 && value[value.size() - 2] > value.back()) {
                const double merged_w = weight[weight.size() - 2] + weight.back();
                const double merged_v = (value[value.size() - 2] * weight[weight.size() - 2] +
                                         value.back() * weight.back()) /
                                        merged_w;
                value.pop_back();
                weight.pop_back();
                const std::size_t ext = extent.back();
                extent.pop_back();
                value.back() = merged_v;
                weight.back() = merged_w;
                extent.back() += ext;
            }
        }

        IsotonicMap map;
        std::size_t pos = 0;
        for (std::size_t blk = 0; blk < value.size(); ++blk) {
            for (std::size_t k = 0; k < extent[blk]; ++k, ++pos) {
                map.breakpoints.push_back(xs[pos]);
                map.values.push_back(value[blk]);
            }
        }
        return map;
    }

    double evaluate(double u) const {
        if (breakpoints.empty()) throw NumericError("isotonic: evaluating an empty map");
        if (u <= breakpoints.front()) return values.front();
        if (u >= breakpoints.back()) return values.back();
        const auto it = std::upper_bound(breakpoints.begin(), breakpoints.end(), u);
        const std::size_t hi = static_cast<std::size_t>(it - breakpoints.begin());
        const std::size_t lo = hi - 1;
        const double span = breakpoints[hi] - breakpoints[lo];
        const double t = (u - breakpoints[lo]) / span;
        return values[lo] + t * (values[hi] - values[lo]);
    }
};

/// Two-parameter sigmoid s -> 1 / (1 + exp(a*s + b)) fitted on raw scores.
struct PlattMap {
    double a = 0.0;
    double b = 0.0;

    double evaluate(double score) const {
        const double z = a * score + b;
        if (z >= 0.0) {
            const double e = std::exp(-z);
            return e / (1.0 + e);
        }
        return 1.0 / (1.0 + std::exp(z));
    }

    /// Fits (a, b) by minimizing the cross-entropy against the smoothed
    /// targets t+ = (N+ + 1)/(N+ + 2), t- = 1/(N- + 2), with damped Newton
    /// steps. Converges when the gradient norm drops below 1e-8 (at most 100
    /// iterations).
    static PlattMap fit(const std::vector<double>& scores, const std::vector<double>& outcomes) {
        if (scores.size() != outcomes.size()) throw DataError("platt: input length mismatch");
        if (scores.size() < 2) throw DataError("platt: need at least 2 points");
        double n_pos = 0.0, n_neg = 0.0;
        for (double o : outcomes) (o > 0.5 ? n_pos : n_neg) += 1.0;
        if (n_pos == 0.0 || n_neg == 0.0)
            throw DataError("platt: both outcome values must be present");

        const double t_pos = (n_pos + 1.0) / (n_pos + 2.0);
        const double t_neg = 1.0 / (n_neg + 2.0);
        std::vector<double> target(scores.size());
        for (std::size_t i = 0; i < scores.size(); ++i)
            target[i] = outcomes[i] > 0.5 ? t_pos : t_neg;

        // Cross-entropy in z_i = a*s_i + b with p_i = 1/(1+e^{z_i}):
        // F = sum_i t_i*z_i + log(1 + e^{-z_i}), computed stably.
        auto objective = [&](double a, double b) {
            double f = 0.0;
            for (std::size_t i = 0; i < scores.size(); ++i) {
                const double z = a * scores[i] + b;
                const double softplus_neg =
                    z > 0.0 ? std::log1p(std::exp(-z)) : -z + std::log1p(std::exp(z));
                f += target[i] * z + softplus_neg;
            }
            return f;
        };

        PlattMap map;
        map.a = 0.0;
        map.b = std::log((n_neg + 1.0) / (n_pos + 1.0));
        double f_current = objective(map.a, map.b);
        for (int iter = 0; iter < 100; ++iter) {
            double g_a = 0.0, g_b = 0.0, h_aa = 0.0, h_ab = 0.0, h_bb = 0.0;
            for (std::size_t i = 0; i < scores.size(); ++i) {
                const double s = scores[i];
                const double p = map.evaluate(s);
                const double diff = target[i] - p;  // dF/dz = t - p with z = a*s+b
                g_a += diff * s;
                g_b += diff;
                const double w = std::max(p * (1.0 - p), 1e-12);
                h_aa += w * s * s;
                h_ab += w * s;
                h_bb += w;
            }
            if (std::sqrt(g_a * g_a + g_b * g_b) < 1e-8) break;
            const double det = h_aa * h_bb - h_ab * h_ab;
            double step_a, step_b;
            if (std::abs(det) < 1e-300) {
                step_a = g_a;  // gradient fallback on a singular Hessian
                step_b = g_b;
            } else {
                step_a = (h_bb * g_a - h_ab * g_b) / det;
                step_b = (h_aa * g_b - h_ab * g_a) / det;
            }
            double scale = 1.0;
            for (int halving = 0; halving < 40; ++halving) {
                const double f_next = objective(map.a - scale * step_a, map.b - scale * step_b);
                if (f_next < f_current + 1e-15) {
                    map.a -= scale * step_a;
                    map.b -= scale * step_b;
                    f_current = f_next;
                    break;
                }
                scale *= 0.5;
            }
        }
        return map;
    }
};

inline IsotonicMap fit_isotonic(const std::vector<double>& confidences,
                                const std::vector<double>& outcomes) {
    return IsotonicMap::fit(confidences, outcomes);
}

inline PlattMap fit_platt(const std::vector<double>& scores, const std::vector<double>& outcomes) {
    return PlattMap::fit(scores, outcomes);
}

enum class CalibrationMethod { Isotonic, Sigmoid };

inline std::string to_string(CalibrationMethod m) {
    return m == CalibrationMethod::Isotonic ? "isotonic" : "sigmoid";
}

/// Per-class calibration applied to a confidence column. Identity when a
/// class was absent from the calibration set. Platt maps act on the logit of
/// the confidence.
struct ClassCalibration {
    std::variant<std::monostate, IsotonicMap, PlattMap> map;

    double evaluate(double p) const {
        if (std::holds_alternative<std::monostate>(map)) return p;
        if (const auto* iso = std::get_if<IsotonicMap>(&map)) return iso->evaluate(p);
        const double clipped = std::clamp(p, kProbClip, 1.0 - kProbClip);
        const double logit = std::log(clipped / (1.0 - clipped));
        return std::get<PlattMap>(map).evaluate(logit);
    }

    bool is_identity() const { return std::holds_alternative<std::monostate>(map); }
};

/// Applies per-class maps to a confidence matrix, clamps negatives to zero
/// and renormalizes each row (uniform fallback when a row maps to all zeros).
inline Eigen::MatrixXd apply_class_maps(const Eigen::MatrixXd& probs,
                                        const std::vector<ClassCalibration>& maps) {
    const int C = static_cast<int>(probs.cols());
    if (static_cast<int>(maps.size()) != C)
        throw DataError("calibration: class map count mismatch");
    Eigen::MatrixXd out(probs.rows(), probs.cols());
    for (Eigen::Index i = 0; i < probs.rows(); ++i) {
        double sum = 0.0;
        for (int c = 0; c < C; ++c) {
            const double v = std::max(0.0, maps[c].evaluate(probs(i, c)));
            out(i, c) = v;
            sum += v;
        }
        if (sum > 0.0) {
            out.row(i) /= sum;
        } else {
            out.row(i).setConstant(1.0 / C);
        }
    }
    return out;
}

/// A confidence model wrapped with one-vs-rest calibration maps.
template <class Model>
struct Calibrated {
    Model base;
    std::vector<ClassCalibration> maps;
    std::vector<std::string> warnings;

    int classes() const { return base.classes(); }

    Eigen::MatrixXd predict_confidences(const Eigen::MatrixXd& X) const {
        return apply_class_maps(base.predict_confidences(X), maps);
    }
};

/// Fits one calibration map per class (one-vs-rest) on the held-out
/// calibration set. The base model is copied, never modified. Classes absent
/// from cal_y fall back to identity maps (recorded as warnings).
template <class Model>
Calibrated<Model> calibrate_model(const Model& model, const Eigen::MatrixXd& cal_x,
                                  const std::vector<int>& cal_y, CalibrationMethod method) {
    if (cal_x.rows() == 0) throw DataError("calibrate: empty calibration set");
    if (static_cast<std::size_t>(cal_x.rows()) != cal_y.size())
        throw DataError("calibrate: calibration rows and labels differ");

    Calibrated<Model> out;
    out.base = model;
    const Eigen::MatrixXd probs = model.predict_confidences(cal_x);
    const int C = static_cast<int>(probs.cols());
    out.maps.resize(C);

    for (int c = 0; c < C; ++c) {
        std::vector<double> conf(cal_y.size()), outcome(cal_y.size());
        int positives = 0;
        for (std::size_t i = 0; i < cal_y.size(); ++i) {
            conf[i] = probs(static_cast<Eigen::Index>(i), c);
            outcome[i] = cal_y[i] == c ? 1.0 : 0.0;
            positives += cal_y[i] == c;
        }
        if (positives == 0) {
            out.warnings.push_back("class " + std::to_string(c) +
                                   " absent from calibration set; identity map");
            continue;
        }
        if (method == CalibrationMethod::Isotonic) {
            out.maps[c].map = IsotonicMap::fit(conf, outcome);
        } else {
            if (positives == static_cast<int>(cal_y.size())) {
                out.warnings.push_back("class " + std::to_string(c) +
                                       " is the whole calibration set; identity map");
                continue;
            }
            std::vector<double> scores(conf.size());
            for (std::size_t i = 0; i < conf.size(); ++i) {
                const double p = std::clamp(conf[i], kProbClip, 1.0 - kProbClip);
                scores[i] = std::log(p / (1.0 - p));
            }
            out.maps[c].map = PlattMap::fit(scores, outcome);
        }
    }
    return out;
}

/// Class-mean centering followed by row renormalization: each column j is
/// shifted by (max_c mean_c - mean_j) where mean_j is the average j-th
/// confidence over examples labeled j; negative intermediates clamp to 0 and
/// all-zero rows fall back to uniform. Classes absent from labels use mean 0.
inline Eigen::MatrixXd adjust_confidences(const Eigen::MatrixXd& probs,
                                          const std::vector<int>& labels) {
    if (static_cast<std::size_t>(probs.rows()) != labels.size())
        throw DataError("adjust: row/label count mismatch");
    const int C = static_cast<int>(probs.cols());
    std::vector<double> mean(C, 0.0);
    std::vector<int> count(C, 0);
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const int y = labels[i];
        if (y < 0 || y >= C) throw DataError("adjust: label out of range");
        mean[y] += probs(static_cast<Eigen::Index>(i), y);
        count[y]++;
    }
    for (int c = 0; c < C; ++c)
        if (count[c] > 0) mean[c] /= count[c];
    const double top = *std::max_element(mean.begin(), mean.end());

    Eigen::MatrixXd out(probs.rows(), probs.cols());
    for (Eigen::Index i = 0; i < probs.rows(); ++i) {
        double sum = 0.0;
        for (int c = 0; c < C; ++c) {
            const double v = std::max(0.0, probs(i, c) - mean[c] + top);
            out(i, c) = v;
            sum += v;
        }
        if (sum > 0.0) out.row(i) /= sum;
        else out.row(i).setConstant(1.0 / C);
    }
    return out;
}

/// Classwise expected calibration error over equal-width confidence bins:
/// for each class, |mean correctness - mean confidence| weighted by bin mass,
/// averaged over classes. Empty bins contribute 0.
inline double classwise_ece(const Eigen::MatrixXd& probs, const std::vector<int>& true_labels,
                            int bins = 10) {
    if (bins < 1) throw ConfigError("classwise_ece: bins must be >= 1");
    if (static_cast<std::size_t>(probs.rows()) != true_labels.size())
        throw DataError("classwise_ece: row/label count mismatch");
    const int C = static_cast<int>(probs.cols());
    const int n = static_cast<int>(probs.rows());
    double total = 0.0;
    std::vector<double> conf_sum(bins), acc_sum(bins);
    std::vector<int> mass(bins);
    for (int c = 0; c < C; ++c) {
        std::fill(conf_sum.begin(), conf_sum.end(), 0.0);
        std::fill(acc_sum.begin(), acc_sum.end(), 0.0);
        std::fill(mass.begin(), mass.end(), 0);
        for (int i = 0; i < n; ++i) {
            const double p = probs(i, c);
            int bin = static_cast<int>(p * bins);
            bin = std::clamp(bin, 0, bins - 1);  // p == 1 joins the top bin
            conf_sum[bin] += p;
            acc_sum[bin] += true_labels[static_cast<std::size_t>(i)] == c ? 1.0 : 0.0;
            mass[bin]++;
        }
        double err = 0.0;
        for (int b = 0; b < bins; ++b) {
            if (mass[b] == 0) continue;
            err += (static_cast<double>(mass[b]) / n) *
                   std::abs(acc_sum[b] / mass[b] - conf_sum[b] / mass[b]);
        }
        total += err;
    }
    return total / C;
}

struct ReliabilityBin {
    double mean_confidence = 0.0;
    double mean_accuracy = 0.0;
    double mass = 0.0;
};

/// Per-bin statistics of class-c confidence vs observed correctness, bins
/// equal-width on [0,1]. Masses sum to 1.
inline std::vector<ReliabilityBin> reliability_bins(const Eigen::MatrixXd& probs,
                                                    const std::vector<int>& true_labels,
                                                    int the_class, int bins) {
    if (bins < 1) throw ConfigError("reliability_bins: bins must be >= 1");
    if (the_class < 0 || the_class >= probs.cols())
        throw ConfigError("reliability_bins: class out of range");
    if (static_cast<std::size_t>(probs.rows()) != true_labels.size())
        throw DataError("reliability_bins: row/label count mismatch");
    std::vector<ReliabilityBin> out(static_cast<std::size_t>(bins));
    std::vector<int> counts(static_cast<std::size_t>(bins), 0);
    const int n = static_cast<int>(probs.rows());
    for (int i = 0; i < n; ++i) {
        const double p = probs(i, the_class);
        int bin = std::clamp(static_cast<int>(p * bins), 0, bins - 1);
        out[bin].mean_confidence += p;
        out[bin].mean_accuracy += true_labels[static_cast<std::size_t>(i)] == the_class ? 1.0 : 0.0;
        counts[bin]++;
    }
    for (int b = 0; b < bins; ++b) {
        if (counts[b] > 0) {
            out[b].mean_confidence /= counts[b];
            out[b].mean_accuracy /= counts[b];
            out[b].mass = static_cast<double>(counts[b]) / n;
        }
    }
    return out;
}

// --- JSON serialization -----------------------------------------------------

inline void to_json(nlohmann::json& j, const IsotonicMap& m) {
    j = {{"kind", "isotonic"}, {"breakpoints", m.breakpoints}, {"values", m.values}};
}

inline void from_json(const nlohmann::json& j, IsotonicMap& m) {
    j.at("breakpoints").get_to(m.breakpoints);
    j.at("values").get_to(m.values);
}

inline void to_json(nlohmann::json& j, const PlattMap& m) {
    j = {{"kind", "platt"}, {"a", m.a}, {"b", m.b}};
}

inline void from_json(const nlohmann::json& j, PlattMap& m) {
    j.at("a").get_to(m.a);
    j.at("b").get_to(m.b);
}

inline void to_json(nlohmann::json& j, const ClassCalibration& c) {
    if (std::holds_alternative<std::monostate>(c.map)) {
        j = {{"kind", "identity"}};
    } else if (const auto* iso = std::get_if<IsotonicMap>(&c.map)) {
        to_json(j, *iso);
    } else {
        to_json(j, std::get<PlattMap>(c.map));
    }
}

inline void from_json(const nlohmann::json& j, ClassCalibration& c) {
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "identity") {
        c.map = std::monostate{};
    } else if (kind == "isotonic") {
        c.map = j.get<IsotonicMap>();
    } else {
        c.map = j.get<PlattMap>();
    }
}

}  // namespace labeltrust
