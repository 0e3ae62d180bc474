#pragma once

// Softmax linear classifier trained by mini-batch SGD on the log loss with
// L2 regularization of the weights (not the bias). Snapshots taken during
// training feed the progressive-ensemble detectors.

#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "labeltrust/errors.hpp"
#include "labeltrust/rng.hpp"

namespace labeltrust {

constexpr double kProbClip = 1e-15;

struct TrainConfig {
    double learning_rate = 0.1;
    double l2 = 1e-4;
    int epochs = 20;
    int batch_size = 32;
    std::uint64_t seed = 0;
    int checkpoint_every = 1;

    void validate() const {
        if (!(learning_rate > 0.0)) throw ConfigError("train: learning_rate must be > 0");
        if (l2 < 0.0) throw ConfigError("train: l2 must be >= 0");
        if (epochs < 1) throw ConfigError("train: epochs must be >= 1");
        if (batch_size < 1) throw ConfigError("train: batch_size must be >= 1");
        if (checkpoint_every < 1) throw ConfigError("train: checkpoint_every must be >= 1");
    }
};

struct LinearModel {
    Eigen::MatrixXd weights;  // C x p
    Eigen::VectorXd bias;     // C

    int classes() const { return static_cast<int>(weights.rows()); }
    int dim() const { return static_cast<int>(weights.cols()); }

    static LinearModel zeros(int C, int p) {
        LinearModel m;
        m.weights = Eigen::MatrixXd::Zero(C, p);
        m.bias = Eigen::VectorXd::Zero(C);
        return m;
    }

    Eigen::MatrixXd decision_scores(const Eigen::MatrixXd& X) const {
        if (X.cols() != weights.cols())
            throw DataError("model: feature dimension mismatch (" + std::to_string(X.cols()) +
                            " vs " + std::to_string(weights.cols()) + ")");
        Eigen::MatrixXd scores = X * weights.transpose();
        scores.rowwise() += bias.transpose();
        return scores;
    }

    /// Row-wise softmax of the affine scores.
    Eigen::MatrixXd predict_confidences(const Eigen::MatrixXd& X) const {
        Eigen::MatrixXd scores = decision_scores(X);
        for (Eigen::Index i = 0; i < scores.rows(); ++i) {
            const double max = scores.row(i).maxCoeff();
            scores.row(i) = (scores.row(i).array() - max).exp();
            scores.row(i) /= scores.row(i).sum();
        }
        return scores;
    }

    /// Argmax class per row, ties broken toward the lowest class index.
    std::vector<int> predict(const Eigen::MatrixXd& X) const {
        const Eigen::MatrixXd scores = decision_scores(X);
        std::vector<int> labels(static_cast<std::size_t>(scores.rows()));
        for (Eigen::Index i = 0; i < scores.rows(); ++i) {
            int best = 0;
            for (int c = 1; c < classes(); ++c)
                if (scores(i, c) > scores(i, best)) best = c;
            labels[static_cast<std::size_t>(i)] = best;
        }
        return labels;
    }
};

struct CheckpointTrace {
    std::vector<LinearModel> snapshots;
    std::vector<double> epoch_losses;  // mean cross-entropy per epoch

    int checkpoints() const { return static_cast<int>(snapshots.size()); }
};

struct SgdResult {
    LinearModel model;
    CheckpointTrace trace;
};

/// Mean softmax cross-entropy over the batch plus its gradient in (W, b).
/// The gradient includes the l2 term (weights only). Returns the
/// unregularized mean loss.
inline double softmax_batch_gradient(const LinearModel& model, const Eigen::MatrixXd& X,
                                     const std::vector<int>& y, double l2,
                                     Eigen::MatrixXd& grad_w, Eigen::VectorXd& grad_b) {
    const int m = static_cast<int>(X.rows());
    const int C = model.classes();
    Eigen::MatrixXd probs = model.predict_confidences(X);
    double loss = 0.0;
    for (int i = 0; i < m; ++i) {
        const double p = std::max(probs(i, y[i]), kProbClip);
        loss -= std::log(p);
        probs(i, y[i]) -= 1.0;  // now holds (p - onehot)
    }
    loss /= m;
    grad_w = (probs.transpose() * X) / static_cast<double>(m) + l2 * model.weights;
    grad_b = probs.colwise().sum().transpose() / static_cast<double>(m);
    (void)C;
    return loss;
}

/// Mini-batch SGD with per-epoch shuffling deterministic in config.seed.
/// A snapshot is appended every checkpoint_every epochs; the returned model
/// is the last snapshot. Throws NumericError with the epoch index when the
/// loss or the weights stop being finite.
inline SgdResult train_sgd(const Eigen::MatrixXd& X, const std::vector<int>& y, int num_classes,
                           const TrainConfig& config) {
    config.validate();
    const int n = static_cast<int>(X.rows());
    if (n < 1) throw DataError("train: empty training set");
    if (static_cast<std::size_t>(n) != y.size())
        throw DataError("train: feature rows and label count differ");
    int max_label = 0;
    for (int label : y) {
        if (label < 0) throw DataError("train: negative label");
        max_label = std::max(max_label, label);
    }
    if (num_classes <= 0) num_classes = max_label + 1;
    if (max_label >= num_classes) throw DataError("train: label outside [0, C)");
    const int p = static_cast<int>(X.cols());

    SgdResult result;
    result.model = LinearModel::zeros(num_classes, p);
    LinearModel& model = result.model;

    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    Rng rng = make_rng(config.seed);

    Eigen::MatrixXd grad_w;
    Eigen::VectorXd grad_b;
    Eigen::MatrixXd batch_x;
    std::vector<int> batch_y;

    for (int epoch = 1; epoch <= config.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        double epoch_loss = 0.0;
        int seen = 0;
        for (int start = 0; start < n; start += config.batch_size) {
            const int m = std::min(config.batch_size, n - start);
            batch_x.resize(m, p);
            batch_y.resize(m);
            for (int k = 0; k < m; ++k) {
                batch_x.row(k) = X.row(order[start + k]);
                batch_y[k] = y[order[start + k]];
            }
            const double loss =
                softmax_batch_gradient(model, batch_x, batch_y, config.l2, grad_w, grad_b);
            model.weights -= config.learning_rate * grad_w;
            model.bias -= config.learning_rate * grad_b;
            epoch_loss += loss * m;
            seen += m;
        }
        epoch_loss /= seen;
        if (!std::isfinite(epoch_loss) || !model.weights.allFinite())
            throw NumericError("train: diverged at epoch " + std::to_string(epoch));
        result.trace.epoch_losses.push_back(epoch_loss);
        if (epoch % config.checkpoint_every == 0) result.trace.snapshots.push_back(model);
    }
    if (!result.trace.snapshots.empty()) result.model = result.trace.snapshots.back();
    return result;
}

/// Mean over examples of -ln p[y], probabilities clipped to
/// [kProbClip, 1 - kProbClip].
inline double log_loss_metric(const Eigen::MatrixXd& probs, const std::vector<int>& y) {
    if (static_cast<std::size_t>(probs.rows()) != y.size())
        throw DataError("log_loss: row/label count mismatch");
    double total = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        const double p = std::clamp(probs(static_cast<Eigen::Index>(i), y[i]), kProbClip,
                                    1.0 - kProbClip);
        total -= std::log(p);
    }
    return total / static_cast<double>(y.size());
}

/// Mean per-class recall; classes absent from y are excluded from the mean.
inline double balanced_accuracy_metric(const std::vector<int>& predictions,
                                       const std::vector<int>& y) {
    if (predictions.size() != y.size())
        throw DataError("balanced_accuracy: length mismatch");
    if (y.empty()) throw DataError("balanced_accuracy: empty input");
    int C = 0;
    for (int label : y) C = std::max(C, label + 1);
    for (int label : predictions) C = std::max(C, label + 1);
    std::vector<int> support(C, 0), hits(C, 0);
    for (std::size_t i = 0; i < y.size(); ++i) {
        support[y[i]]++;
        if (predictions[i] == y[i]) hits[y[i]]++;
    }
    double total = 0.0;
    int present = 0;
    for (int c = 0; c < C; ++c) {
        if (support[c] == 0) continue;
        total += static_cast<double>(hits[c]) / support[c];
        present++;
    }
    return total / present;
}

inline void to_json(nlohmann::json& j, const TrainConfig& c) {
    j = {{"learning_rate", c.learning_rate}, {"l2", c.l2},
         {"epochs", c.epochs},               {"batch_size", c.batch_size},
         {"seed", c.seed},                   {"checkpoint_every", c.checkpoint_every}};
}

inline void from_json(const nlohmann::json& j, TrainConfig& c) {
    c.learning_rate = j.value("learning_rate", c.learning_rate);
    c.l2 = j.value("l2", c.l2);
    c.epochs = j.value("epochs", c.epochs);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.seed = j.value("seed", c.seed);
    c.checkpoint_every = j.value("checkpoint_every", c.checkpoint_every);
}

inline void to_json(nlohmann::json& j, const LinearModel& m) {
    nlohmann::json weights = nlohmann::json::array();
    for (Eigen::Index i = 0; i < m.weights.rows(); ++i) {
        nlohmann::json row = nlohmann::json::array();
        for (Eigen::Index c = 0; c < m.weights.cols(); ++c) row.push_back(m.weights(i, c));
        weights.push_back(std::move(row));
    }
    nlohmann::json bias = nlohmann::json::array();
    for (Eigen::Index i = 0; i < m.bias.size(); ++i) bias.push_back(m.bias(i));
    j = {{"weights", weights}, {"bias", bias}};
}

inline void from_json(const nlohmann::json& j, LinearModel& m) {
    const auto& weights = j.at("weights");
    const auto rows = static_cast<Eigen::Index>(weights.size());
    const auto cols = rows > 0 ? static_cast<Eigen::Index>(weights.at(0).size()) : 0;
    m.weights.resize(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i)
        for (Eigen::Index c = 0; c < cols; ++c) m.weights(i, c) = weights.at(i).at(c).get<double>();
    const auto& bias = j.at("bias");
    m.bias.resize(static_cast<Eigen::Index>(bias.size()));
    for (Eigen::Index i = 0; i < m.bias.size(); ++i) m.bias(i) = bias.at(i).get<double>();
}

}  // namespace labeltrust
