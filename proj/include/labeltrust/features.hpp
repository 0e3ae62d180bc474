#pragma once

// Feature preprocessing: per-column standardization and one-hot encoding for
// tabular data, TF-IDF with L2 normalization for text, and random Fourier
// features approximating the RBF kernel. Transformers are immutable after
// fit; transform is pure.

#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "labeltrust/dataset.hpp"
#include "labeltrust/errors.hpp"
#include "labeltrust/rng.hpp"
#include "labeltrust/text.hpp"

namespace labeltrust {

/// Standardizes numeric columns (population mean/std from the fit data;
/// zero-variance columns map to 0) and one-hot encodes categorical columns
/// (vocabulary from the fit data; unseen categories become an all-zeros
/// block).
struct TabularEncoder {
    struct ColumnEncoding {
        ColumnKind kind = ColumnKind::Numeric;
        std::string name;
        double mean = 0.0;
        double std = 0.0;                     // 0 marks a constant column
        std::vector<std::string> categories;  // sorted, Categorical only
    };

    std::vector<ColumnEncoding> encodings;
    int output_dim = 0;
    bool matrix_mode = false;  // fitted on a bare numeric matrix

    static TabularEncoder fit(const Dataset& train) {
        if (train.n() < 1) throw DataError("encoder: empty training data");
        TabularEncoder enc;
        if (train.columns.empty()) {
            enc.matrix_mode = true;
            for (int j = 0; j < train.features.cols(); ++j) {
                ColumnEncoding e;
                e.kind = ColumnKind::Numeric;
                e.name = "f" + std::to_string(j);
                const auto col = train.features.col(j);
                e.mean = col.mean();
                e.std = std::sqrt((col.array() - e.mean).square().mean());
                enc.encodings.push_back(std::move(e));
                enc.output_dim++;
            }
            return enc;
        }
        for (const Column& col : train.columns) {
            if (col.kind == ColumnKind::Text) continue;  // text is TF-IDF territory
            ColumnEncoding e;
            e.kind = col.kind;
            e.name = col.name;
            if (col.kind == ColumnKind::Numeric) {
                double mean = 0.0;
                for (double v : col.numeric) mean += v;
                mean /= static_cast<double>(col.numeric.size());
                double var = 0.0;
                for (double v : col.numeric) var += (v - mean) * (v - mean);
                var /= static_cast<double>(col.numeric.size());
                e.mean = mean;
                e.std = std::sqrt(var);
                enc.output_dim += 1;
            } else {
                std::map<std::string, int> seen;
                for (const std::string& v : col.values) seen.emplace(v, 0);
                for (const auto& [v, _] : seen) e.categories.push_back(v);
                enc.output_dim += static_cast<int>(e.categories.size());
            }
            enc.encodings.push_back(std::move(e));
        }
        if (enc.encodings.empty()) throw DataError("encoder: no tabular columns to encode");
        return enc;
    }

    Matrix transform(const Dataset& ds) const {
        const int n = ds.n();
        Matrix out = Matrix::Zero(n, output_dim);
        if (matrix_mode) {
            if (ds.features.cols() != static_cast<Eigen::Index>(encodings.size()))
                throw DataError("encoder: feature dimension mismatch");
            for (std::size_t j = 0; j < encodings.size(); ++j) {
                const auto& e = encodings[j];
                if (e.std > 0.0)
                    out.col(static_cast<Eigen::Index>(j)) =
                        (ds.features.col(static_cast<Eigen::Index>(j)).array() - e.mean) / e.std;
                // constant columns stay 0
            }
            return out;
        }
        int offset = 0;
        for (const auto& e : encodings) {
            const Column* col = nullptr;
            for (const Column& c : ds.columns)
                if (c.name == e.name) { col = &c; break; }
            if (!col) throw DataError("encoder: column '" + e.name + "' missing at transform time");
            if (e.kind == ColumnKind::Numeric) {
                if (col->kind != ColumnKind::Numeric)
                    throw DataError("encoder: column '" + e.name + "' changed type");
                if (e.std > 0.0)
                    for (int i = 0; i < n; ++i) out(i, offset) = (col->numeric[i] - e.mean) / e.std;
                offset += 1;
            } else {
                for (int i = 0; i < n; ++i) {
                    const auto it = std::lower_bound(e.categories.begin(), e.categories.end(),
                                                     col->values[i]);
                    if (it != e.categories.end() && *it == col->values[i])
                        out(i, offset + static_cast<int>(it - e.categories.begin())) = 1.0;
                    // unseen category: all-zeros block
                }
                offset += static_cast<int>(e.categories.size());
            }
        }
        return out;
    }
};

/// TF-IDF with idf(t) = ln((1+N)/(1+df(t))) + 1 and L2-normalized rows.
/// Vocabulary and document frequencies come from the fit corpus only; unseen
/// tokens are ignored, empty documents map to the zero row.
struct TfidfVectorizer {
    std::string column;  // text column this vectorizer was fitted on
    std::vector<std::string> vocabulary;  // sorted
    std::vector<double> idf;

    static TfidfVectorizer fit(const std::vector<std::string>& docs,
                               const std::string& column_name = "") {
        if (docs.empty()) throw DataError("tfidf: empty corpus");
        std::map<std::string, int> df;
        for (const std::string& doc : docs) {
            std::map<std::string, int> seen;
            for (const std::string& tok : tokenize(doc)) seen.emplace(tok, 1);
            for (const auto& [tok, _] : seen) df[tok]++;
        }
        if (df.empty()) throw DataError("tfidf: empty vocabulary");
        TfidfVectorizer v;
        v.column = column_name;
        const double n_docs = static_cast<double>(docs.size());
        for (const auto& [tok, count] : df) {
            v.vocabulary.push_back(tok);
            v.idf.push_back(std::log((1.0 + n_docs) / (1.0 + count)) + 1.0);
        }
        return v;
    }

    static TfidfVectorizer fit(const Dataset& train, const std::string& text_column) {
        for (const Column& c : train.columns)
            if (c.name == text_column && c.kind == ColumnKind::Text)
                return fit(c.values, text_column);
        throw DataError("tfidf: text column '" + text_column + "' not found");
    }

    int output_dim() const { return static_cast<int>(vocabulary.size()); }

    Matrix transform(const std::vector<std::string>& docs) const {
        Matrix out = Matrix::Zero(static_cast<Eigen::Index>(docs.size()), output_dim());
        for (std::size_t i = 0; i < docs.size(); ++i) {
            for (const std::string& tok : tokenize(docs[i])) {
                const auto it = std::lower_bound(vocabulary.begin(), vocabulary.end(), tok);
                if (it != vocabulary.end() && *it == tok) {
                    const auto j = static_cast<Eigen::Index>(it - vocabulary.begin());
                    out(static_cast<Eigen::Index>(i), j) += idf[j];
                }
            }
            const double norm = out.row(static_cast<Eigen::Index>(i)).norm();
            if (norm > 0.0) out.row(static_cast<Eigen::Index>(i)) /= norm;
        }
        return out;
    }

    Matrix transform(const Dataset& ds) const {
        for (const Column& c : ds.columns)
            if (c.name == column && c.kind == ColumnKind::Text) return transform(c.values);
        throw DataError("tfidf: text column '" + column + "' missing at transform time");
    }
};

/// Random Fourier features for the RBF kernel exp(-gamma * ||x - y||^2):
/// z(x) = sqrt(2/D) * cos(W x + b) with W_ij ~ N(0, 2*gamma) and
/// b ~ U[0, 2*pi). The bandwidth defaults to gamma = 1 / (d * Var(X)) where
/// Var(X) is the variance of all entries of the fit matrix.
struct RandomFourierFeatures {
    Matrix weights;  // D x d
    Vector offsets;  // D
    double gamma = 0.0;

    int output_dim() const { return static_cast<int>(weights.rows()); }

    static RandomFourierFeatures fit(const Matrix& train_features, int D, std::uint64_t seed) {
        if (train_features.rows() < 1 || train_features.cols() < 1)
            throw DataError("rff: empty training matrix");
        if (D < 1) throw ConfigError("rff: output dimension must be >= 1");
        const double mean = train_features.mean();
        const double var = (train_features.array() - mean).square().mean();
        if (var <= 0.0)
            throw DataError("rff: zero total variance, bandwidth undefined");
        const int d = static_cast<int>(train_features.cols());
        RandomFourierFeatures rff;
        rff.gamma = 1.0 / (d * var);
        rff.weights.resize(D, d);
        rff.offsets.resize(D);
        Rng rng = make_rng(seed);
        std::normal_distribution<double> gauss(0.0, std::sqrt(2.0 * rff.gamma));
        const double two_pi = 2.0 * std::acos(-1.0);
        std::uniform_real_distribution<double> unif(0.0, two_pi);
        for (int i = 0; i < D; ++i)
            for (int j = 0; j < d; ++j) rff.weights(i, j) = gauss(rng);
        for (int i = 0; i < D; ++i) rff.offsets(i) = unif(rng);
        return rff;
    }

    Matrix transform(const Matrix& X) const {
        if (X.cols() != weights.cols()) throw DataError("rff: feature dimension mismatch");
        const int D = output_dim();
        Matrix projected = X * weights.transpose();
        projected.rowwise() += offsets.transpose();
        return std::sqrt(2.0 / D) * projected.array().cos();
    }
};

constexpr int kDefaultRffDim = 1000;

struct FeatureConfig {
    bool standardize = true;
    bool use_rff = false;
    int rff_dim = kDefaultRffDim;
    std::vector<std::string> text_columns;  // TF-IDF applied per listed column
    std::uint64_t seed = 0;
};

/// Composite transformer: [tfidf blocks | rff(tabular block) or tabular
/// block]. RFF applies to the encoded tabular features only.
struct FeaturePipeline {
    std::optional<TabularEncoder> encoder;
    std::vector<TfidfVectorizer> tfidf;
    std::optional<RandomFourierFeatures> rff;
    int output_dim = 0;

    Matrix transform(const Dataset& ds) const {
        std::vector<Matrix> blocks;
        for (const TfidfVectorizer& v : tfidf) blocks.push_back(v.transform(ds));
        if (encoder) {
            Matrix tab = encoder->transform(ds);
            blocks.push_back(rff ? rff->transform(tab) : std::move(tab));
        }
        if (blocks.empty()) throw DataError("feature pipeline: nothing to transform");
        int cols = 0;
        for (const Matrix& b : blocks) cols += static_cast<int>(b.cols());
        Matrix out(ds.n(), cols);
        int offset = 0;
        for (const Matrix& b : blocks) {
            out.middleCols(offset, static_cast<int>(b.cols())) = b;
            offset += static_cast<int>(b.cols());
        }
        return out;
    }
};

inline FeaturePipeline fit_feature_pipeline(const Dataset& train, const FeatureConfig& config) {
    FeaturePipeline pipe;
    for (const std::string& col : config.text_columns)
        pipe.tfidf.push_back(TfidfVectorizer::fit(train, col));

    const bool has_tabular =
        train.columns.empty()
            ? train.has_numeric_features()
            : std::any_of(train.columns.begin(), train.columns.end(),
                          [](const Column& c) { return c.kind != ColumnKind::Text; });
    if (has_tabular && config.standardize) {
        pipe.encoder = TabularEncoder::fit(train);
        if (config.use_rff) {
            const Matrix encoded = pipe.encoder->transform(train);
            pipe.rff = RandomFourierFeatures::fit(encoded, config.rff_dim,
                                                  derive_seed(config.seed, 0xfeedULL));
        }
    }
    if (!pipe.encoder && pipe.tfidf.empty())
        throw DataError("feature pipeline: no usable columns");
    pipe.output_dim = 0;
    for (const TfidfVectorizer& v : pipe.tfidf) pipe.output_dim += v.output_dim();
    if (pipe.encoder)
        pipe.output_dim += pipe.rff ? pipe.rff->output_dim() : pipe.encoder->output_dim;
    return pipe;
}

/// Standardization + one-hot over the training part only.
inline TabularEncoder fit_standard_preprocessor(const Dataset& train) {
    return TabularEncoder::fit(train);
}

inline TfidfVectorizer fit_tfidf(const Dataset& train, const std::string& text_column) {
    return TfidfVectorizer::fit(train, text_column);
}

inline RandomFourierFeatures fit_rff(const Matrix& train_features, int D, std::uint64_t seed) {
    return RandomFourierFeatures::fit(train_features, D, seed);
}

// --- JSON serialization -----------------------------------------------------

inline void to_json(nlohmann::json& j, const TabularEncoder::ColumnEncoding& e) {
    j = {{"kind", e.kind == ColumnKind::Numeric ? "numeric" : "categorical"},
         {"name", e.name},
         {"mean", e.mean},
         {"std", e.std},
         {"categories", e.categories}};
}

inline void from_json(const nlohmann::json& j, TabularEncoder::ColumnEncoding& e) {
    e.kind = j.at("kind").get<std::string>() == "numeric" ? ColumnKind::Numeric
                                                          : ColumnKind::Categorical;
    j.at("name").get_to(e.name);
    j.at("mean").get_to(e.mean);
    j.at("std").get_to(e.std);
    j.at("categories").get_to(e.categories);
}

inline void to_json(nlohmann::json& j, const TabularEncoder& enc) {
    j = {{"kind", "standardizer+onehot"},
         {"encodings", enc.encodings},
         {"output_dim", enc.output_dim},
         {"matrix_mode", enc.matrix_mode}};
}

inline void from_json(const nlohmann::json& j, TabularEncoder& enc) {
    j.at("encodings").get_to(enc.encodings);
    j.at("output_dim").get_to(enc.output_dim);
    j.at("matrix_mode").get_to(enc.matrix_mode);
}

inline void to_json(nlohmann::json& j, const TfidfVectorizer& v) {
    j = {{"kind", "tfidf"}, {"column", v.column}, {"vocabulary", v.vocabulary}, {"idf", v.idf}};
}

inline void from_json(const nlohmann::json& j, TfidfVectorizer& v) {
    j.at("column").get_to(v.column);
    j.at("vocabulary").get_to(v.vocabulary);
    j.at("idf").get_to(v.idf);
}

inline nlohmann::json matrix_to_json(const Matrix& m) {
    nlohmann::json rows = nlohmann::json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        nlohmann::json row = nlohmann::json::array();
        for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
        rows.push_back(std::move(row));
    }
    return rows;
}

inline Matrix matrix_from_json(const nlohmann::json& j) {
    const auto rows = static_cast<Eigen::Index>(j.size());
    if (rows == 0) return Matrix();
    const auto cols = static_cast<Eigen::Index>(j.at(0).size());
    Matrix m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i)
        for (Eigen::Index c = 0; c < cols; ++c) m(i, c) = j.at(i).at(c).get<double>();
    return m;
}

inline void to_json(nlohmann::json& j, const RandomFourierFeatures& rff) {
    nlohmann::json offsets = nlohmann::json::array();
    for (Eigen::Index i = 0; i < rff.offsets.size(); ++i) offsets.push_back(rff.offsets(i));
    j = {{"kind", "rff"},
         {"gamma", rff.gamma},
         {"weights", matrix_to_json(rff.weights)},
         {"offsets", offsets}};
}

inline void from_json(const nlohmann::json& j, RandomFourierFeatures& rff) {
    j.at("gamma").get_to(rff.gamma);
    rff.weights = matrix_from_json(j.at("weights"));
    const auto& offsets = j.at("offsets");
    rff.offsets.resize(static_cast<Eigen::Index>(offsets.size()));
    for (Eigen::Index i = 0; i < rff.offsets.size(); ++i)
        rff.offsets(i) = offsets.at(i).get<double>();
}

inline void to_json(nlohmann::json& j, const FeaturePipeline& pipe) {
    j = nlohmann::json{{"kind", "composite"}, {"output_dim", pipe.output_dim}};
    if (pipe.encoder) j["encoder"] = *pipe.encoder;
    if (!pipe.tfidf.empty()) j["tfidf"] = pipe.tfidf;
    if (pipe.rff) j["rff"] = *pipe.rff;
}

inline void from_json(const nlohmann::json& j, FeaturePipeline& pipe) {
    j.at("output_dim").get_to(pipe.output_dim);
    if (j.contains("encoder")) pipe.encoder = j.at("encoder").get<TabularEncoder>();
    if (j.contains("tfidf")) j.at("tfidf").get_to(pipe.tfidf);
    if (j.contains("rff")) pipe.rff = j.at("rff").get<RandomFourierFeatures>();
}

}  // namespace labeltrust
