#pragma once

// CSV ingestion and emission. UTF-8, comma separated, first row is the
// header. Fields may be double-quoted with "" escaping.

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "labeltrust/dataset.hpp"
#include "labeltrust/errors.hpp"

namespace labeltrust {

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line, std::size_t row_index) {
    std::vector<std::string> fields;
    std::string field;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char ch = line[i];
        if (quoted) {
            if (ch == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    field.push_back('"');
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                field.push_back(ch);
            }
        } else if (ch == '"') {
            quoted = true;
        } else if (ch == ',') {
            fields.push_back(std::move(field));
            field.clear();
        } else if (ch != '\r') {
            field.push_back(ch);
        }
    }
    if (quoted)
        throw DataError("csv: unterminated quote in row " + std::to_string(row_index));
    fields.push_back(std::move(field));
    return fields;
}

inline bool parse_double(const std::string& s, double& out) {
    if (s.empty()) return false;
    const char* begin = s.data();
    const char* end = s.data() + s.size();
    auto [ptr, ec] = std::from_chars(begin, end, out);
    return ec == std::errc{} && ptr == end;
}

inline std::string csv_escape(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char ch : s) {
        if (ch == '"') out += "\"\"";
        else out.push_back(ch);
    }
    out += "\"";
    return out;
}

}  // namespace detail

/// Loads a CSV into a Dataset. Columns listed in text_columns stay raw text;
/// other columns become numeric when every cell parses as a number, otherwise
/// categorical. Labels map to contiguous indices in lexicographic order of
/// their original string values. Row order is preserved.
inline Dataset load_csv(const std::string& path, const std::string& label_column,
                        const std::vector<std::string>& text_columns = {},
                        const std::optional<std::string>& true_label_column = std::nullopt) {
    std::ifstream in(path);
    if (!in) throw DataError("csv: cannot open file '" + path + "'");

    std::string line;
    if (!std::getline(in, line)) throw DataError("csv: empty file '" + path + "'");
    const std::vector<std::string> header = detail::split_csv_line(line, 0);

    int label_col = -1, true_col = -1;
    for (std::size_t j = 0; j < header.size(); ++j) {
        if (header[j] == label_column) label_col = static_cast<int>(j);
        if (true_label_column && header[j] == *true_label_column) true_col = static_cast<int>(j);
    }
    if (label_col < 0) throw DataError("csv: label column '" + label_column + "' not found");
    if (true_label_column && true_col < 0)
        throw DataError("csv: true-label column '" + *true_label_column + "' not found");

    std::vector<std::vector<std::string>> rows;
    std::size_t row_index = 0;
    while (std::getline(in, line)) {
        ++row_index;
        if (line.empty() && in.eof()) break;
        auto fields = detail::split_csv_line(line, row_index);
        if (fields.size() != header.size())
            throw DataError("csv: row " + std::to_string(row_index) + " has " +
                            std::to_string(fields.size()) + " fields, expected " +
                            std::to_string(header.size()));
        rows.push_back(std::move(fields));
    }
    if (rows.empty()) throw DataError("csv: no data rows in '" + path + "'");

    // Label map: lexicographic over original values.
    std::set<std::string> label_values;
    for (const auto& r : rows) label_values.insert(r[label_col]);
    if (label_values.size() < 2)
        throw DataError("csv: label column has fewer than 2 distinct values");
    std::map<std::string, int> label_index;
    Dataset ds;
    for (const std::string& v : label_values) {
        label_index[v] = static_cast<int>(ds.label_names.size());
        ds.label_names.push_back(v);
    }
    ds.num_classes = static_cast<int>(ds.label_names.size());

    const std::set<std::string> text_set(text_columns.begin(), text_columns.end());
    std::vector<int> numeric_cols;
    for (std::size_t j = 0; j < header.size(); ++j) {
        if (static_cast<int>(j) == label_col || static_cast<int>(j) == true_col) continue;
        Column col;
        col.name = header[j];
        if (text_set.count(header[j])) {
            col.kind = ColumnKind::Text;
            for (const auto& r : rows) col.values.push_back(r[j]);
        } else {
            // Numeric if every cell parses; empty cells are rejected.
            bool numeric = true;
            std::vector<double> parsed;
            parsed.reserve(rows.size());
            for (std::size_t i = 0; i < rows.size(); ++i) {
                double v;
                if (rows[i][j].empty())
                    throw DataError("csv: missing value in column '" + header[j] + "' at row " +
                                    std::to_string(i + 1));
                if (!detail::parse_double(rows[i][j], v)) {
                    numeric = false;
                    break;
                }
                parsed.push_back(v);
            }
            if (numeric) {
                col.kind = ColumnKind::Numeric;
                col.numeric = std::move(parsed);
            } else {
                col.kind = ColumnKind::Categorical;
                for (const auto& r : rows) col.values.push_back(r[j]);
            }
        }
        ds.columns.push_back(std::move(col));
    }

    ds.observed_labels.reserve(rows.size());
    for (const auto& r : rows) ds.observed_labels.push_back(label_index.at(r[label_col]));
    if (true_col >= 0) {
        std::vector<int> truth;
        truth.reserve(rows.size());
        for (std::size_t i = 0; i < rows.size(); ++i) {
            auto it = label_index.find(rows[i][true_col]);
            if (it == label_index.end())
                throw DataError("csv: true label at row " + std::to_string(i + 1) +
                                " not among observed label values");
            truth.push_back(it->second);
        }
        ds.true_labels = std::move(truth);
        ds.refresh_mask();
    }

    // If everything is numeric, also materialize the feature matrix.
    bool all_numeric = true;
    for (const Column& c : ds.columns)
        if (c.kind != ColumnKind::Numeric) all_numeric = false;
    if (all_numeric && !ds.columns.empty()) {
        ds.features.resize(ds.n(), static_cast<Eigen::Index>(ds.columns.size()));
        for (std::size_t j = 0; j < ds.columns.size(); ++j)
            for (int i = 0; i < ds.n(); ++i)
                ds.features(i, static_cast<Eigen::Index>(j)) = ds.columns[j].numeric[i];
    }
    ds.validate();
    return ds;
}

/// Writes a dataset back to CSV. Raw columns are emitted when present,
/// otherwise the numeric feature matrix as f0..f{d-1}. The label column uses
/// original label values; true labels are added when known.
inline void write_dataset_csv(const Dataset& ds, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw DataError("csv: cannot write file '" + path + "'");
    out.precision(17);

    std::vector<std::string> names;
    if (!ds.columns.empty()) {
        for (const Column& c : ds.columns) names.push_back(c.name);
    } else {
        for (int j = 0; j < ds.features.cols(); ++j) names.push_back("f" + std::to_string(j));
    }
    for (const std::string& name : names) out << detail::csv_escape(name) << ',';
    out << "label";
    if (ds.has_true_labels()) out << ",true_label";
    out << '\n';

    for (int i = 0; i < ds.n(); ++i) {
        if (!ds.columns.empty()) {
            for (const Column& c : ds.columns) {
                if (c.kind == ColumnKind::Numeric) out << c.numeric[i];
                else out << detail::csv_escape(c.values[i]);
                out << ',';
            }
        } else {
            for (int j = 0; j < ds.features.cols(); ++j) out << ds.features(i, j) << ',';
        }
        out << detail::csv_escape(ds.label_names[ds.observed_labels[i]]);
        if (ds.has_true_labels())
            out << ',' << detail::csv_escape(ds.label_names[(*ds.true_labels)[i]]);
        out << '\n';
    }
}

inline void save_json(const nlohmann::json& doc, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write file '" + path + "'");
    out << doc.dump(2) << '\n';
}

inline nlohmann::json load_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open file '" + path + "'");
    nlohmann::json doc;
    in >> doc;
    return doc;
}

inline void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write file '" + path + "'");
    out << content;
}

}  // namespace labeltrust
