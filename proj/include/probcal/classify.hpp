#pragma once

#include <cstdint>
#include <vector>

#include "probcal/types.hpp"

namespace probcal::classify {

// Argmax of each row; ties break toward the lowest class index.
std::vector<int> bayes_classify(const ProbMatrix& probs);

// Draw each label from its probability row (inverse-CDF walk over the
// classes with one uniform per row, stream derived from (seed, row)).
std::vector<int> stochastic_classify(const ProbMatrix& probs, std::uint64_t seed);
std::vector<int> stochastic_classify_serial(const ProbMatrix& probs, std::uint64_t seed);

}  // namespace probcal::classify
