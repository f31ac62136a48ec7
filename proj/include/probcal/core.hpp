#pragma once

#include "probcal/types.hpp"

namespace probcal {

// Maximum-likelihood prior from labels: entry i = n_i / N.
Prior prior_from_labels(const Dataset& ds);

// Class weights w_i = 1/P(i); errors on any zero prior entry.
Vec balancing_weights(const Prior& prior);

// Expand class-constant weights to one weight per example via the labels.
Vec per_example_weights(const Dataset& ds, const Vec& class_weights);

}  // namespace probcal
