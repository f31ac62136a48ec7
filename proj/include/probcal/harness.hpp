#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "probcal/mlp.hpp"
#include "probcal/simgen.hpp"
#include "probcal/types.hpp"

namespace probcal::harness {

// The five model variants: base (unweighted, representative data),
// weighted (balancing weights), deweighted (weighted model's predictions
// pushed back to the training prior), biased (equal-composition training
// data), debiased (biased model's predictions pushed to the representative
// prior).
enum class Variant { base, weighted, deweighted, biased, debiased };

std::string to_string(Variant v);
Variant variant_from_string(const std::string& s);

struct SweepConfig {
    std::vector<std::int64_t> sizes;  // training-set sizes, ascending
    int repeats = 3;
    std::vector<Variant> variants{Variant::base, Variant::weighted, Variant::deweighted,
                                  Variant::biased, Variant::debiased};
    std::int64_t test_size = 20000;
    std::uint64_t seed = 0;
    mlp::TrainConfig train;

    // data source: the simulator unless external CSV paths are given
    std::optional<std::string> external_train_csv;
    std::optional<std::string> external_test_csv;

    bool uses_sim() const { return !external_train_csv.has_value(); }
    void validate() const;

    static SweepConfig from_json_file(const std::string& path);
    static SweepConfig from_json_string(const std::string& text);
    std::string to_json_string() const;
};

struct SweepRow {
    std::string variant;
    int class_idx = 0;
    std::int64_t size = 0;
    std::string metric;  // overshoot_C | overshoot_R | overshoot_F1 | kl
    double value = 0.0;
    double variance = 0.0;
};

struct SweepResult {
    std::vector<SweepRow> rows;  // fixed order: variant, class, size, metric
    std::string summary_json;    // per-(variant,size,repeat) detail
};

SweepResult run_sweep(const SweepConfig& cfg);

// Writes sweep.csv / summary.json / overshoot_*.svg + kl.svg into out_dir.
void emit_report(const SweepResult& result, const std::string& out_dir,
                 const std::set<std::string>& formats);

// Re-ingest an emitted sweep.csv (round-trip of the long-format table).
std::vector<SweepRow> read_rows_csv(const std::string& path);

}  // namespace probcal::harness
