#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "probcal/types.hpp"

namespace probcal::metrics {

// Expected confusion counts taken from the model's own probabilities:
// eTP_i sums P(i|x) over rows assigned i, eFN_i over rows assigned
// elsewhere; variances replace each P with P(1-P). eFP_i = NP_i - eTP_i
// exactly, where NP_i is the (non-random) number of rows assigned i.
struct ExpectedCounts {
    Vec etp, efp, efn;
    Vec vtp, vfp, vfn;
    std::vector<std::int64_t> np;
    std::int64_t total = 0;
};

ExpectedCounts expected_counts(const ProbMatrix& probs, const std::vector<int>& assigned);
ExpectedCounts expected_counts_serial(const ProbMatrix& probs, const std::vector<int>& assigned);

// A metric that may be undefined for a class (zero denominator); undefined
// is reported as absent, never as 0 or 1.
struct MetricValue {
    std::optional<double> value;
    std::optional<double> variance;
};

struct ClassPredicted {
    MetricValue completeness, reliability, f1;
};

struct PredictedMetricOptions {
    // Use the Var(C) denominator exactly as printed in the source text,
    // (eTP+eFP)^4, instead of the propagation-of-errors (eTP+eFN)^4.
    bool printed_var_c = false;
};

std::vector<ClassPredicted> predicted_metrics(const ExpectedCounts& counts,
                                              const PredictedMetricOptions& opt = {});

struct ClassObserved {
    std::optional<double> completeness, reliability, f1;
    std::int64_t tp = 0, fp = 0, fn = 0;
};

std::vector<ClassObserved> observed_metrics(const std::vector<int>& assigned,
                                            const std::vector<int>& truth, int class_count);

struct OvershootCell {
    std::optional<double> overshoot;  // observed - predicted
    std::optional<double> z;
    bool inconsistent = false;  // |z| > 3, or a nonzero overshoot with zero variance
};

struct ClassOvershoot {
    OvershootCell completeness, reliability, f1;
};

struct MetricReport {
    ExpectedCounts counts;
    std::vector<ClassPredicted> predicted;
    std::vector<ClassObserved> observed;
    std::vector<ClassOvershoot> overshoot;
    bool any_inconsistent = false;
};

MetricReport overshoot_report(const ProbMatrix& probs, const std::vector<int>& assigned,
                              const std::vector<int>& truth,
                              const PredictedMetricOptions& opt = {});

// Mean KL(true || model) per true class, in nats; 0*ln(0) = 0 and model
// entries are clamped to >= 1e-12 before the ratio (clamping is counted).
struct KlReport {
    std::vector<std::optional<double>> per_class;
    double overall = 0.0;
    std::int64_t clamped_rows = 0;
    std::vector<std::int64_t> class_counts;
};

KlReport mean_kl_by_class(const ProbMatrix& true_probs, const ProbMatrix& model_probs,
                          const std::vector<int>& truth);
KlReport mean_kl_by_class_serial(const ProbMatrix& true_probs, const ProbMatrix& model_probs,
                                 const std::vector<int>& truth);

std::string report_to_json_string(const MetricReport& report, const KlReport* kl = nullptr);

}  // namespace probcal::metrics
