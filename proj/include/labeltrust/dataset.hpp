#pragma once

// Dataset container plus synthetic generation, label corruption and
// deterministic splitting. Datasets are immutable after construction; every
// generator and corruption routine returns a new value and is a pure function
// of its arguments including the seed.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "labeltrust/errors.hpp"
#include "labeltrust/rng.hpp"
#include "labeltrust/text.hpp"

namespace labeltrust {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

enum class ColumnKind { Numeric, Categorical, Text };

// One raw (pre-encoding) column of an ingested table.
struct Column {
    ColumnKind kind = ColumnKind::Numeric;
    std::string name;
    std::vector<double> numeric;      // Numeric
    std::vector<std::string> values;  // Categorical / Text

    std::size_t size() const {
        return kind == ColumnKind::Numeric ? numeric.size() : values.size();
    }
};

/// Feature matrix (or raw column table pre-encoding) plus observed labels,
/// optional ground-truth labels and optional mislabel mask.
struct Dataset {
    Matrix features;              // n x d encoded numeric view; empty pre-encoding
    std::vector<Column> columns;  // raw columns for ingested data; empty for synthetic
    std::vector<int> observed_labels;
    std::optional<std::vector<int>> true_labels;
    std::optional<std::vector<std::uint8_t>> mislabel_mask;
    int num_classes = 0;
    std::vector<std::string> label_names;  // class index -> original label value

    int n() const { return static_cast<int>(observed_labels.size()); }

    int raw_dim() const {
        return columns.empty() ? static_cast<int>(features.cols())
                               : static_cast<int>(columns.size());
    }

    bool has_numeric_features() const { return features.size() > 0; }
    bool has_true_labels() const { return true_labels.has_value(); }
    bool has_mask() const { return mislabel_mask.has_value(); }

    std::vector<int> class_counts() const {
        std::vector<int> counts(num_classes, 0);
        for (int y : observed_labels) counts[y]++;
        return counts;
    }

    std::vector<double> class_priors() const {
        std::vector<double> priors(num_classes, 0.0);
        const double inv = 1.0 / static_cast<double>(n());
        for (int y : observed_labels) priors[y] += inv;
        return priors;
    }

    // Rebuilds the mask from observed vs true labels; drops it when no true
    // labels are available.
    void refresh_mask() {
        if (!true_labels) {
            mislabel_mask.reset();
            return;
        }
        std::vector<std::uint8_t> mask(observed_labels.size());
        for (std::size_t i = 0; i < mask.size(); ++i)
            mask[i] = observed_labels[i] != (*true_labels)[i] ? 1 : 0;
        mislabel_mask = std::move(mask);
    }

    void validate() const {
        if (n() < 1) throw DataError("dataset is empty");
        if (num_classes < 2) throw DataError("dataset needs at least 2 classes");
        for (int y : observed_labels)
            if (y < 0 || y >= num_classes)
                throw DataError("observed label out of range [0, C)");
        if (true_labels) {
            if (true_labels->size() != observed_labels.size())
                throw DataError("true_labels length mismatch");
            for (int y : *true_labels)
                if (y < 0 || y >= num_classes)
                    throw DataError("true label out of range [0, C)");
        }
        if (mislabel_mask) {
            if (!true_labels) throw DataError("mislabel_mask without true_labels");
            if (mislabel_mask->size() != observed_labels.size())
                throw DataError("mislabel_mask length mismatch");
            for (std::size_t i = 0; i < mislabel_mask->size(); ++i) {
                const bool differs = observed_labels[i] != (*true_labels)[i];
                if (differs != static_cast<bool>((*mislabel_mask)[i]))
                    throw DataError("mislabel_mask inconsistent with labels");
            }
        }
        if (has_numeric_features() &&
            features.rows() != static_cast<Eigen::Index>(observed_labels.size()))
            throw DataError("feature row count differs from label count");
        for (const Column& col : columns)
            if (col.size() != observed_labels.size())
                throw DataError("column '" + col.name + "' length mismatch");
        const auto priors = class_priors();
        const double total = std::accumulate(priors.begin(), priors.end(), 0.0);
        if (std::abs(total - 1.0) > 1e-12)
            throw DataError("class priors do not sum to 1");
    }

    /// Row subset in the given index order; all parallel attributes follow.
    Dataset subset(const std::vector<int>& idx) const {
        Dataset out;
        out.num_classes = num_classes;
        out.label_names = label_names;
        out.observed_labels.reserve(idx.size());
        for (int i : idx) out.observed_labels.push_back(observed_labels.at(i));
        if (has_numeric_features()) {
            out.features.resize(static_cast<Eigen::Index>(idx.size()), features.cols());
            for (std::size_t r = 0; r < idx.size(); ++r)
                out.features.row(static_cast<Eigen::Index>(r)) = features.row(idx[r]);
        }
        for (const Column& col : columns) {
            Column sub;
            sub.kind = col.kind;
            sub.name = col.name;
            if (col.kind == ColumnKind::Numeric) {
                sub.numeric.reserve(idx.size());
                for (int i : idx) sub.numeric.push_back(col.numeric.at(i));
            } else {
                sub.values.reserve(idx.size());
                for (int i : idx) sub.values.push_back(col.values.at(i));
            }
            out.columns.push_back(std::move(sub));
        }
        if (true_labels) {
            std::vector<int> t;
            t.reserve(idx.size());
            for (int i : idx) t.push_back((*true_labels)[i]);
            out.true_labels = std::move(t);
        }
        if (mislabel_mask) {
            std::vector<std::uint8_t> m;
            m.reserve(idx.size());
            for (int i : idx) m.push_back((*mislabel_mask)[i]);
            out.mislabel_mask = std::move(m);
        }
        return out;
    }
};

enum class NoiseKind { NCAR, NAR, NNAR };

/// Column-stochastic matrix: entries(observed, true) = P(observed | true).
struct NoiseTransitionMatrix {
    Matrix entries;
    NoiseKind kind = NoiseKind::NAR;

    int classes() const { return static_cast<int>(entries.cols()); }

    void validate() const {
        if (entries.rows() != entries.cols() || entries.rows() < 2)
            throw ConfigError("transition matrix must be CxC with C >= 2");
        for (Eigen::Index c = 0; c < entries.cols(); ++c) {
            double sum = 0.0;
            for (Eigen::Index r = 0; r < entries.rows(); ++r) {
                const double v = entries(r, c);
                if (v < 0.0 || v > 1.0)
                    throw ConfigError("transition matrix entries must lie in [0,1]");
                sum += v;
            }
            if (std::abs(sum - 1.0) > 1e-12)
                throw ConfigError("transition matrix columns must sum to 1");
        }
    }

    // Expected off-diagonal mass under the given class priors.
    double noise_ratio(const std::vector<double>& priors) const {
        double rho = 0.0;
        for (int c = 0; c < classes(); ++c) rho += priors.at(c) * (1.0 - entries(c, c));
        return rho;
    }

    static NoiseTransitionMatrix identity(int C) {
        NoiseTransitionMatrix T;
        T.entries = Matrix::Identity(C, C);
        T.kind = NoiseKind::NCAR;
        return T;
    }

    // Keeps the true class with probability 1-rho, otherwise flips uniformly
    // to one of the other C-1 classes.
    static NoiseTransitionMatrix uniform_flip(int C, double rho) {
        if (C < 2) throw ConfigError("uniform_flip needs C >= 2");
        if (rho < 0.0 || rho >= 1.0) throw ConfigError("uniform_flip needs rho in [0,1)");
        NoiseTransitionMatrix T;
        T.entries = Matrix::Constant(C, C, rho / static_cast<double>(C - 1));
        for (int c = 0; c < C; ++c) T.entries(c, c) = 1.0 - rho;
        T.kind = NoiseKind::NCAR;
        return T;
    }
};

/// Two interleaving half circles in 2-d, class 0 = lower moon = minority.
/// Lower moon points are (1 - cos t, 0.5 - sin t), upper (cos t, sin t),
/// t evenly spaced on [0, pi], plus N(0, noise_std^2) jitter per coordinate.
inline Dataset make_two_moons(int n, double minority_fraction, double noise_std,
                              std::uint64_t seed) {
    if (n < 2) throw ConfigError("make_two_moons: n must be >= 2");
    if (!(minority_fraction > 0.0 && minority_fraction < 0.5))
        throw ConfigError("make_two_moons: minority_fraction must lie in (0, 0.5)");
    const int n0 = static_cast<int>(std::lround(n * minority_fraction));
    if (n0 == 0) throw ConfigError("make_two_moons: minority class rounds to 0 examples");
    const int n1 = n - n0;

    Dataset ds;
    ds.num_classes = 2;
    ds.label_names = {"0", "1"};
    ds.features.resize(n, 2);
    ds.observed_labels.resize(n);

    Rng rng = make_rng(seed);
    std::normal_distribution<double> jitter(0.0, 1.0);
    const double pi = std::acos(-1.0);
    auto arc = [&](int count, int offset, bool lower) {
        for (int i = 0; i < count; ++i) {
            const double t = count == 1 ? 0.0 : pi * i / static_cast<double>(count - 1);
            double x = lower ? 1.0 - std::cos(t) : std::cos(t);
            double y = lower ? 0.5 - std::sin(t) : std::sin(t);
            if (noise_std > 0.0) {
                x += noise_std * jitter(rng);
                y += noise_std * jitter(rng);
            }
            ds.features(offset + i, 0) = x;
            ds.features(offset + i, 1) = y;
            ds.observed_labels[offset + i] = lower ? 0 : 1;
        }
    };
    arc(n0, 0, true);
    arc(n1, n0, false);
    ds.true_labels = ds.observed_labels;
    ds.refresh_mask();
    return ds;
}

/// Isotropic Gaussian clusters, one per class, centers evenly spaced on a
/// circle of radius center_radius in the first two dimensions. Class sizes
/// follow the priors (largest remainder rounding).
inline Dataset make_blobs(int n, const std::vector<double>& priors, double cluster_std,
                          std::uint64_t seed, int dim = 2, double center_radius = 3.0) {
    const int C = static_cast<int>(priors.size());
    if (C < 2) throw ConfigError("make_blobs: need at least 2 classes");
    if (n < C) throw ConfigError("make_blobs: n must be >= number of classes");
    if (dim < 2) throw ConfigError("make_blobs: dim must be >= 2");
    double total = 0.0;
    for (double p : priors) {
        if (p <= 0.0) throw ConfigError("make_blobs: priors must be positive");
        total += p;
    }
    if (std::abs(total - 1.0) > 1e-9) throw ConfigError("make_blobs: priors must sum to 1");

    // Largest-remainder apportionment of n over classes.
    std::vector<int> counts(C);
    std::vector<std::pair<double, int>> remainders;
    int assigned = 0;
    for (int c = 0; c < C; ++c) {
        const double target = priors[c] * n;
        counts[c] = static_cast<int>(std::floor(target));
        assigned += counts[c];
        remainders.push_back({target - counts[c], c});
    }
    std::sort(remainders.begin(), remainders.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return a.second < b.second;
    });
    for (int k = 0; k < n - assigned; ++k) counts[remainders[k].second]++;
    for (int c = 0; c < C; ++c)
        if (counts[c] == 0) throw ConfigError("make_blobs: a class received 0 examples");

    Dataset ds;
    ds.num_classes = C;
    for (int c = 0; c < C; ++c) ds.label_names.push_back(std::to_string(c));
    ds.features.resize(n, dim);
    ds.observed_labels.resize(n);

    Rng rng = make_rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    const double pi = std::acos(-1.0);
    int row = 0;
    for (int c = 0; c < C; ++c) {
        const double angle = 2.0 * pi * c / static_cast<double>(C);
        Vector center = Vector::Zero(dim);
        center(0) = center_radius * std::cos(angle);
        center(1) = center_radius * std::sin(angle);
        for (int i = 0; i < counts[c]; ++i, ++row) {
            for (int j = 0; j < dim; ++j)
                ds.features(row, j) = center(j) + cluster_std * gauss(rng);
            ds.observed_labels[row] = c;
        }
    }
    ds.true_labels = ds.observed_labels;
    ds.refresh_mask();
    return ds;
}

/// Flips the observed label of exactly per_class_count examples per true
/// class, chosen uniformly without replacement, to a uniformly drawn other
/// class. True labels are unchanged; the mask is recomputed.
inline Dataset flip_labels(const Dataset& dataset, int per_class_count, std::uint64_t seed) {
    if (!dataset.has_true_labels())
        throw ConfigError("flip_labels: dataset has no true labels");
    if (per_class_count < 0) throw ConfigError("flip_labels: negative count");
    Dataset out = dataset;
    if (per_class_count == 0) {
        out.refresh_mask();
        return out;
    }
    const int C = dataset.num_classes;
    const auto& truth = *dataset.true_labels;
    Rng rng = make_rng(seed);
    for (int c = 0; c < C; ++c) {
        std::vector<int> members;
        for (int i = 0; i < dataset.n(); ++i)
            if (truth[i] == c) members.push_back(i);
        if (per_class_count > static_cast<int>(members.size()))
            throw ConfigError("flip_labels: per_class_count exceeds size of class " +
                              std::to_string(c));
        std::shuffle(members.begin(), members.end(), rng);
        std::uniform_int_distribution<int> other(0, C - 2);
        for (int k = 0; k < per_class_count; ++k) {
            int target = other(rng);
            if (target >= c) target++;  // skip the true class
            out.observed_labels[members[k]] = target;
        }
    }
    out.refresh_mask();
    return out;
}

namespace detail {

inline int draw_from_column(const Matrix& T, int true_class, double u) {
    double cum = 0.0;
    const int C = static_cast<int>(T.rows());
    for (int r = 0; r < C; ++r) {
        cum += T(r, true_class);
        if (u < cum) return r;
    }
    return C - 1;  // guard against rounding at u ~ 1
}

}  // namespace detail

/// Redraws every observed label from the transition matrix column of its true
/// class. Mask recomputed; deterministic in seed.
inline Dataset apply_transition_noise(const Dataset& dataset, const NoiseTransitionMatrix& T,
                                      std::uint64_t seed) {
    T.validate();
    if (!dataset.has_true_labels())
        throw ConfigError("apply_transition_noise: dataset has no true labels");
    if (T.classes() != dataset.num_classes)
        throw ConfigError("apply_transition_noise: transition matrix dimension mismatch");
    Dataset out = dataset;
    Rng rng = make_rng(seed);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    const auto& truth = *dataset.true_labels;
    for (int i = 0; i < dataset.n(); ++i)
        out.observed_labels[i] = detail::draw_from_column(T.entries, truth[i], unif(rng));
    out.refresh_mask();
    return out;
}

/// Feature-dependent variant: the caller supplies a map from feature row to a
/// transition matrix (evaluated per example).
inline Dataset apply_transition_noise(
    const Dataset& dataset,
    const std::function<NoiseTransitionMatrix(const Eigen::RowVectorXd&)>& transition_of,
    std::uint64_t seed) {
    if (!dataset.has_true_labels())
        throw ConfigError("apply_transition_noise: dataset has no true labels");
    if (!dataset.has_numeric_features())
        throw ConfigError("apply_transition_noise: feature-dependent noise needs numeric features");
    Dataset out = dataset;
    Rng rng = make_rng(seed);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    const auto& truth = *dataset.true_labels;
    for (int i = 0; i < dataset.n(); ++i) {
        NoiseTransitionMatrix T = transition_of(dataset.features.row(i));
        T.kind = NoiseKind::NNAR;
        T.validate();
        if (T.classes() != dataset.num_classes)
            throw ConfigError("apply_transition_noise: transition matrix dimension mismatch");
        out.observed_labels[i] = detail::draw_from_column(T.entries, truth[i], unif(rng));
    }
    out.refresh_mask();
    return out;
}

/// Heuristic labeler: fires with a fixed label when its feature test passes,
/// abstains otherwise.
struct LabelingRule {
    enum class Kind { Threshold, TokenPresence };
    Kind kind = Kind::Threshold;
    std::string column;     // raw column name; empty = use feature_index on the matrix
    int feature_index = -1; // numeric matrix column for Threshold rules
    double threshold = 0.0;
    std::string token;      // TokenPresence
    int emitted_label = 0;

    std::optional<int> apply(const Dataset& ds, int row) const {
        if (kind == Kind::Threshold) {
            double value = 0.0;
            if (!column.empty()) {
                const Column* col = nullptr;
                for (const Column& c : ds.columns)
                    if (c.name == column) { col = &c; break; }
                if (!col || col->kind != ColumnKind::Numeric)
                    throw ConfigError("labeling rule: numeric column '" + column + "' not found");
                value = col->numeric[row];
            } else {
                if (feature_index < 0 || feature_index >= ds.features.cols())
                    throw ConfigError("labeling rule: feature index out of range");
                value = ds.features(row, feature_index);
            }
            if (value >= threshold) return emitted_label;
            return std::nullopt;
        }
        // token presence
        const Column* col = nullptr;
        for (const Column& c : ds.columns)
            if (c.name == column) { col = &c; break; }
        if (!col || col->kind != ColumnKind::Text)
            throw ConfigError("labeling rule: text column '" + column + "' not found");
        for (const std::string& tok : tokenize(col->values[row]))
            if (tok == token) return emitted_label;
        return std::nullopt;
    }
};

struct FallbackPolicy {
    enum class Kind { UniformRandom, GlobalMajority };
    Kind kind = Kind::GlobalMajority;
    std::uint64_t seed = 0;
};

/// Majority vote over firing rules. Ties among leading classes and all-abstain
/// rows go to the fallback policy: uniform-random (among tied leaders, or all
/// classes when nothing fired) or the dataset's majority class.
inline Dataset aggregate_rules(const Dataset& dataset, const std::vector<LabelingRule>& rules,
                               const FallbackPolicy& fallback) {
    if (rules.empty()) throw ConfigError("aggregate_rules: need at least one rule");
    for (const LabelingRule& r : rules)
        if (r.emitted_label < 0 || r.emitted_label >= dataset.num_classes)
            throw ConfigError("aggregate_rules: emitted label out of range");

    int majority_class = 0;
    {
        const auto counts = dataset.class_counts();
        majority_class = static_cast<int>(
            std::max_element(counts.begin(), counts.end()) - counts.begin());
    }

    Dataset out = dataset;
    Rng rng = make_rng(fallback.seed);
    for (int i = 0; i < dataset.n(); ++i) {
        std::vector<int> votes(dataset.num_classes, 0);
        int fired = 0;
        for (const LabelingRule& r : rules) {
            if (auto label = r.apply(dataset, i)) {
                votes[*label]++;
                fired++;
            }
        }
        int label;
        if (fired == 0) {
            if (fallback.kind == FallbackPolicy::Kind::GlobalMajority) {
                label = majority_class;
            } else {
                std::uniform_int_distribution<int> any(0, dataset.num_classes - 1);
                label = any(rng);
            }
        } else {
            const int best = *std::max_element(votes.begin(), votes.end());
            std::vector<int> leaders;
            for (int c = 0; c < dataset.num_classes; ++c)
                if (votes[c] == best) leaders.push_back(c);
            if (leaders.size() == 1) {
                label = leaders[0];
            } else if (fallback.kind == FallbackPolicy::Kind::GlobalMajority) {
                label = majority_class;
            } else {
                std::uniform_int_distribution<int> pick(0, static_cast<int>(leaders.size()) - 1);
                label = leaders[pick(rng)];
            }
        }
        out.observed_labels[i] = label;
    }
    out.refresh_mask();
    return out;
}

/// Split fractions. train + validation + test must sum to 1; the calibration
/// part is carved out of the validation allocation.
struct SplitSpec {
    double train_fraction = 0.6;
    double validation_fraction = 0.2;
    double test_fraction = 0.2;
    double calibration_fraction_of_validation = 0.5;
    std::uint64_t seed = 0;

    void validate() const {
        const double parts[] = {train_fraction, validation_fraction, test_fraction};
        for (double p : parts)
            if (p < 0.0 || p > 1.0) throw ConfigError("split fractions must lie in [0,1]");
        if (std::abs(train_fraction + validation_fraction + test_fraction - 1.0) > 1e-9)
            throw ConfigError("split fractions must sum to 1");
        if (calibration_fraction_of_validation < 0.0 || calibration_fraction_of_validation > 1.0)
            throw ConfigError("calibration fraction must lie in [0,1]");
    }
};

struct Split {
    Dataset train, validation, calibration, test;
    std::vector<int> train_indices, validation_indices, calibration_indices, test_indices;
    std::vector<std::string> warnings;
};

/// Stratified-by-observed-label split into train / validation / calibration /
/// test. Classes smaller than the number of non-empty parts are assigned
/// round-robin, largest target fraction first. Deterministic in spec.seed.
inline Split split_dataset(const Dataset& dataset, const SplitSpec& spec) {
    spec.validate();
    const int C = dataset.num_classes;

    std::vector<int> train_idx, val_idx, cal_idx, test_idx;
    // Parts in allocation order: train, validation(total), test.
    const double fracs[3] = {spec.train_fraction, spec.validation_fraction, spec.test_fraction};

    for (int c = 0; c < C; ++c) {
        std::vector<int> members;
        for (int i = 0; i < dataset.n(); ++i)
            if (dataset.observed_labels[i] == c) members.push_back(i);
        if (members.empty()) continue;
        Rng rng = make_rng(derive_seed(spec.seed, 1000 + static_cast<std::uint64_t>(c)));
        std::shuffle(members.begin(), members.end(), rng);

        const int m = static_cast<int>(members.size());
        int counts[3] = {0, 0, 0};
        int positive_parts = 0;
        for (double f : fracs)
            if (f > 0.0) positive_parts++;
        if (m < positive_parts) {
            // Round-robin, largest fraction first.
            std::vector<int> order = {0, 1, 2};
            std::stable_sort(order.begin(), order.end(),
                             [&](int a, int b) { return fracs[a] > fracs[b]; });
            int slot = 0;
            for (int k = 0; k < m; ++k) {
                while (fracs[order[slot % 3]] <= 0.0) slot++;
                counts[order[slot % 3]]++;
                slot++;
            }
        } else {
            // Largest remainder.
            double remainders[3];
            int assigned = 0;
            for (int p = 0; p < 3; ++p) {
                const double target = fracs[p] * m;
                counts[p] = static_cast<int>(std::floor(target));
                remainders[p] = target - counts[p];
                assigned += counts[p];
            }
            std::vector<int> order = {0, 1, 2};
            std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
                return remainders[a] > remainders[b];
            });
            for (int k = 0; k < m - assigned; ++k) counts[order[k]]++;
        }

        int pos = 0;
        for (int k = 0; k < counts[0]; ++k) train_idx.push_back(members[pos++]);
        // Validation allocation splits into calibration + validation.
        const int val_total = counts[1];
        const int cal_count = static_cast<int>(
            std::lround(spec.calibration_fraction_of_validation * val_total));
        for (int k = 0; k < cal_count; ++k) cal_idx.push_back(members[pos++]);
        for (int k = 0; k < val_total - cal_count; ++k) val_idx.push_back(members[pos++]);
        for (int k = 0; k < counts[2]; ++k) test_idx.push_back(members[pos++]);
    }

    std::sort(train_idx.begin(), train_idx.end());
    std::sort(val_idx.begin(), val_idx.end());
    std::sort(cal_idx.begin(), cal_idx.end());
    std::sort(test_idx.begin(), test_idx.end());

    auto require_nonempty = [&](const std::vector<int>& idx, double frac, const char* name) {
        if (frac > 0.0 && idx.empty())
            throw DataError(std::string("split: the ") + name + " part received zero examples");
    };
    require_nonempty(train_idx, spec.train_fraction, "train");
    require_nonempty(val_idx,
                     spec.validation_fraction * (1.0 - spec.calibration_fraction_of_validation),
                     "validation");
    require_nonempty(cal_idx, spec.validation_fraction * spec.calibration_fraction_of_validation,
                     "calibration");
    require_nonempty(test_idx, spec.test_fraction, "test");

    Split split;
    split.train = dataset.subset(train_idx);
    split.validation = val_idx.empty() ? Dataset{} : dataset.subset(val_idx);
    split.calibration = cal_idx.empty() ? Dataset{} : dataset.subset(cal_idx);
    split.test = test_idx.empty() ? Dataset{} : dataset.subset(test_idx);
    split.train_indices = std::move(train_idx);
    split.validation_indices = std::move(val_idx);
    split.calibration_indices = std::move(cal_idx);
    split.test_indices = std::move(test_idx);

    auto check_classes = [&](const Dataset& part, const char* name) {
        if (part.n() == 0) return;
        std::vector<int> seen(C, 0);
        for (int y : part.observed_labels) seen[y] = 1;
        for (int c = 0; c < C; ++c)
            if (!seen[c])
                split.warnings.push_back(std::string(name) + " part lost class " +
                                         std::to_string(c));
    };
    check_classes(split.train, "train");
    check_classes(split.validation, "validation");
    check_classes(split.calibration, "calibration");
    check_classes(split.test, "test");
    return split;
}

}  // namespace labeltrust
