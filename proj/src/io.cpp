#include "probcal/io.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

#include <json.hpp>

namespace probcal::io {

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = line.find(',', start);
        if (pos == std::string::npos) {
            out.push_back(line.substr(start));
            break;
        }
        out.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
    if (!out.empty() && !out.back().empty() && out.back().back() == '\r') out.back().pop_back();
    return out;
}

double parse_double(const std::string& cell, std::size_t line_no, const std::string& col) {
    double v = 0.0;
    const char* first = cell.data();
    const char* last = cell.data() + cell.size();
    auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc{} || ptr != last || !std::isfinite(v))
        throw std::runtime_error("CSV line " + std::to_string(line_no) + ", column '" + col +
                                 "': non-numeric cell '" + cell + "'");
    return v;
}

long parse_int(const std::string& cell, std::size_t line_no, const std::string& col) {
    long v = 0;
    auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
    if (ec != std::errc{} || ptr != cell.data() + cell.size())
        throw std::runtime_error("CSV line " + std::to_string(line_no) + ", column '" + col +
                                 "': expected integer, got '" + cell + "'");
    return v;
}

std::ifstream open_input(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open file: " + path);
    return in;
}

std::ofstream open_output(const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write file: " + path);
    return out;
}

}  // namespace

std::string format_double(double v) {
    char buf[40];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    if (ec != std::errc{}) throw std::runtime_error("format_double failed");
    return std::string(buf, ptr);
}

Dataset load_dataset(const std::string& path, const CsvSchema& schema) {
    auto in = open_input(path);
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("empty CSV: " + path);
    const auto header = split_csv_line(line);

    std::unordered_map<std::string, int> col_of;
    for (std::size_t i = 0; i < header.size(); ++i) col_of[header[i]] = static_cast<int>(i);

    std::vector<int> feat_cols;
    if (!schema.feature_columns.empty()) {
        for (const auto& name : schema.feature_columns) {
            auto it = col_of.find(name);
            if (it == col_of.end())
                throw std::runtime_error("CSV missing declared feature column '" + name + "'");
            feat_cols.push_back(it->second);
        }
    } else {
        for (int d = 0;; ++d) {
            auto it = col_of.find("f" + std::to_string(d));
            if (it == col_of.end()) break;
            feat_cols.push_back(it->second);
        }
        if (feat_cols.empty())
            throw std::runtime_error("CSV has no feature columns f0..f{d-1}: " + path);
    }
    int label_col = -1, weight_col = -1;
    if (schema.label_column) {
        auto it = col_of.find(*schema.label_column);
        if (it != col_of.end()) label_col = it->second;
    }
    if (schema.weight_column) {
        auto it = col_of.find(*schema.weight_column);
        if (it != col_of.end()) weight_col = it->second;
    }

    std::vector<std::vector<double>> rows;
    std::vector<int> labels;
    std::vector<double> weights;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line == "\r") continue;
        const auto cells = split_csv_line(line);
        if (cells.size() != header.size())
            throw std::runtime_error("CSV line " + std::to_string(line_no) +
                                     ": wrong field count");
        std::vector<double> row(feat_cols.size());
        for (std::size_t k = 0; k < feat_cols.size(); ++k)
            row[k] = parse_double(cells[feat_cols[k]], line_no, header[feat_cols[k]]);
        rows.push_back(std::move(row));
        if (label_col >= 0) {
            const long v = parse_int(cells[label_col], line_no, header[label_col]);
            if (v < 0)
                throw std::runtime_error("CSV line " + std::to_string(line_no) +
                                         ": negative label");
            labels.push_back(static_cast<int>(v));
        }
        if (weight_col >= 0)
            weights.push_back(parse_double(cells[weight_col], line_no, header[weight_col]));
    }

    Dataset ds;
    ds.features.resize(static_cast<Eigen::Index>(rows.size()),
                       static_cast<Eigen::Index>(feat_cols.size()));
    for (std::size_t r = 0; r < rows.size(); ++r)
        for (std::size_t c = 0; c < rows[r].size(); ++c)
            ds.features(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];

    if (label_col >= 0) {
        int max_label = -1;
        for (int v : labels) max_label = std::max(max_label, v);
        ds.class_count = schema.class_count ? *schema.class_count : max_label + 1;
        ds.class_count = std::max(ds.class_count, 2);
        for (int v : labels) {
            if (v >= ds.class_count)
                throw std::runtime_error("label " + std::to_string(v) +
                                         " >= declared class_count " +
                                         std::to_string(ds.class_count));
        }
        ds.labels = std::move(labels);
    } else {
        ds.class_count = schema.class_count.value_or(2);
    }
    if (weight_col >= 0) {
        Vec w(static_cast<Eigen::Index>(weights.size()));
        for (std::size_t i = 0; i < weights.size(); ++i) w(static_cast<Eigen::Index>(i)) = weights[i];
        ds.weights = std::move(w);
    }
    ds.validate();
    return ds;
}

void save_dataset(const Dataset& ds, const std::string& path) {
    auto out = open_output(path);
    for (int d = 0; d < ds.dim(); ++d) out << (d ? ",f" : "f") << d;
    if (ds.labels) out << ",label";
    if (ds.weights) out << ",weight";
    out << "\n";
    for (Eigen::Index r = 0; r < ds.size(); ++r) {
        for (int d = 0; d < ds.dim(); ++d) {
            if (d) out << ',';
            out << format_double(ds.features(r, d));
        }
        if (ds.labels) out << ',' << (*ds.labels)[r];
        if (ds.weights) out << ',' << format_double((*ds.weights)(r));
        out << "\n";
    }
}

Predictions load_predictions(const std::string& path, std::optional<int> class_count) {
    auto in = open_input(path);
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("empty CSV: " + path);
    const auto header = split_csv_line(line);
    std::unordered_map<std::string, int> col_of;
    for (std::size_t i = 0; i < header.size(); ++i) col_of[header[i]] = static_cast<int>(i);

    std::vector<int> prob_cols;
    for (int k = 0;; ++k) {
        auto it = col_of.find("p" + std::to_string(k));
        if (it == col_of.end()) break;
        prob_cols.push_back(it->second);
    }
    if (prob_cols.empty()) throw std::runtime_error("prediction CSV has no p0..p{K-1} columns");
    if (class_count && *class_count != static_cast<int>(prob_cols.size()))
        throw std::runtime_error("prediction CSV class count mismatch");
    int label_col = -1;
    if (auto it = col_of.find("label"); it != col_of.end()) label_col = it->second;

    std::vector<std::vector<double>> rows;
    std::vector<int> labels;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line == "\r") continue;
        const auto cells = split_csv_line(line);
        if (cells.size() != header.size())
            throw std::runtime_error("CSV line " + std::to_string(line_no) +
                                     ": wrong field count");
        std::vector<double> row(prob_cols.size());
        for (std::size_t k = 0; k < prob_cols.size(); ++k)
            row[k] = parse_double(cells[prob_cols[k]], line_no, header[prob_cols[k]]);
        rows.push_back(std::move(row));
        if (label_col >= 0)
            labels.push_back(static_cast<int>(parse_int(cells[label_col], line_no, "label")));
    }
    Mat p(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(prob_cols.size()));
    for (std::size_t r = 0; r < rows.size(); ++r)
        for (std::size_t c = 0; c < rows[r].size(); ++c)
            p(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];

    Predictions out{ProbMatrix::ingest(std::move(p)), std::nullopt};
    if (label_col >= 0) out.labels = std::move(labels);
    return out;
}

void save_predictions(const ProbMatrix& probs, const std::string& path,
                      const std::vector<int>* labels) {
    if (labels && static_cast<Eigen::Index>(labels->size()) != probs.rows())
        throw std::invalid_argument("save_predictions: label count mismatch");
    auto out = open_output(path);
    for (int k = 0; k < probs.class_count(); ++k) out << (k ? ",p" : "p") << k;
    if (labels) out << ",label";
    out << "\n";
    const Mat& p = probs.values();
    for (Eigen::Index r = 0; r < p.rows(); ++r) {
        for (Eigen::Index c = 0; c < p.cols(); ++c) {
            if (c) out << ',';
            out << format_double(p(r, c));
        }
        if (labels) out << ',' << (*labels)[r];
        out << "\n";
    }
}

std::vector<int> load_labels(const std::string& path, const std::string& column) {
    auto in = open_input(path);
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("empty CSV: " + path);
    const auto header = split_csv_line(line);
    int col = -1;
    for (std::size_t i = 0; i < header.size(); ++i)
        if (header[i] == column) col = static_cast<int>(i);
    if (col < 0) throw std::runtime_error("CSV has no '" + column + "' column: " + path);
    std::vector<int> labels;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line == "\r") continue;
        const auto cells = split_csv_line(line);
        labels.push_back(static_cast<int>(parse_int(cells.at(col), line_no, column)));
    }
    return labels;
}

void save_labels(const std::vector<int>& labels, const std::string& path) {
    auto out = open_output(path);
    out << "label\n";
    for (int v : labels) out << v << "\n";
}

Manifest load_manifest(const std::string& path) {
    auto in = open_input(path);
    nlohmann::json j;
    in >> j;
    Manifest m;
    m.class_count = j.at("class_count").get<int>();
    if (j.contains("class_names")) m.class_names = j["class_names"].get<std::vector<std::string>>();
    return m;
}

void save_manifest(const Manifest& m, const std::string& path) {
    nlohmann::json j;
    j["class_count"] = m.class_count;
    j["class_names"] = m.class_names;
    auto out = open_output(path);
    out << j.dump(2) << "\n";
}

Vec parse_prior_arg(const std::string& arg) {
    if (arg.find(',') == std::string::npos && arg.find(".json") != std::string::npos) {
        auto in = open_input(arg);
        nlohmann::json j;
        in >> j;
        const auto v = j.get<std::vector<double>>();
        Vec out(static_cast<Eigen::Index>(v.size()));
        for (std::size_t i = 0; i < v.size(); ++i) out(static_cast<Eigen::Index>(i)) = v[i];
        return out;
    }
    std::vector<double> vals;
    std::stringstream ss(arg);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        if (tok.empty()) continue;
        vals.push_back(std::stod(tok));
    }
    if (vals.empty()) throw std::runtime_error("cannot parse prior argument: " + arg);
    Vec out(static_cast<Eigen::Index>(vals.size()));
    for (std::size_t i = 0; i < vals.size(); ++i) out(static_cast<Eigen::Index>(i)) = vals[i];
    return out;
}

}  // namespace probcal::io
