#pragma once

#include <cstdint>
#include <vector>

#include "probcal/types.hpp"

namespace probcal::simgen {

// Axis-aligned Gaussian component for one class.
struct GaussianClassSpec {
    Vec mean;
    Vec sigma;  // per-dimension standard deviations, all > 0
};

struct SimConfig {
    std::vector<GaussianClassSpec> classes;
    Vec fractions;            // class abundances, on the simplex
    std::int64_t n_points = 0;
    std::uint64_t seed = 0;

    int dim() const { return classes.empty() ? 0 : static_cast<int>(classes[0].mean.size()); }
    int class_count() const { return static_cast<int>(classes.size()); }
    void validate() const;
};

enum class SimKind { representative, biased };

// The 4-dimensional, 3-class mixture used throughout: class 0 at the origin,
// class 1 at (1, 0.5, 0, 0), class 2 at (-0.75, -0.5, 0, 0) with a doubled
// spread in dimension 2; dimension 3 is identical for all classes.
// Representative abundances (0.6, 0.38, 0.02); biased is equal thirds.
SimConfig default_spec(SimKind kind, std::int64_t n_points = 0, std::uint64_t seed = 0);

// Labels i.i.d. categorical(fractions), features from the label's Gaussian.
// Each row consumes its own derived stream, so the result depends only on
// (seed, row index) and parallel sampling is bit-equal to serial.
Dataset sample_dataset(const SimConfig& cfg);
Dataset sample_dataset_serial(const SimConfig& cfg);

// Posterior P(i|x) of the mixture, computed in log space.
Vec true_posterior(const SimConfig& cfg, const Eigen::Ref<const Vec>& x);

ProbMatrix oracle_matrix(const SimConfig& cfg, const Dataset& ds);
ProbMatrix oracle_matrix_serial(const SimConfig& cfg, const Dataset& ds);

}  // namespace probcal::simgen
