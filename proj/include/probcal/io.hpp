#pragma once

#include <optional>
#include <string>
#include <vector>

#include "probcal/types.hpp"

namespace probcal::io {

// Column roles for dataset ingestion. Empty feature list means "every
// column named f<k>, in index order"; label/weight columns are picked up
// by name when declared.
struct CsvSchema {
    std::vector<std::string> feature_columns;       // empty -> auto-detect f0..f{d-1}
    std::optional<std::string> label_column = "label";
    std::optional<std::string> weight_column = "weight";
    std::optional<int> class_count;                 // default: 1 + max label
};

Dataset load_dataset(const std::string& path, const CsvSchema& schema = {});
void save_dataset(const Dataset& ds, const std::string& path);

struct Predictions {
    ProbMatrix probs;
    std::optional<std::vector<int>> labels;
};
Predictions load_predictions(const std::string& path, std::optional<int> class_count = {});
void save_predictions(const ProbMatrix& probs, const std::string& path,
                      const std::vector<int>* labels = nullptr);

std::vector<int> load_labels(const std::string& path, const std::string& column = "label");
void save_labels(const std::vector<int>& labels, const std::string& path);

struct Manifest {
    int class_count = 0;
    std::vector<std::string> class_names;
};
Manifest load_manifest(const std::string& path);
void save_manifest(const Manifest& m, const std::string& path);

// Round-trip decimal text for a double (shortest form that parses back
// to the same bits).
std::string format_double(double v);

// Parse a prior given either as a comma list ("0.6,0.38,0.02") or a path
// to a JSON array file.
Vec parse_prior_arg(const std::string& arg);

}  // namespace probcal::io
