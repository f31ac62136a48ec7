#include "probcal/core.hpp"

#include <stdexcept>

namespace probcal {

Prior prior_from_labels(const Dataset& ds) {
    if (!ds.labels) throw std::invalid_argument("prior_from_labels: dataset has no labels");
    const auto n = ds.size();
    if (n == 0) throw std::invalid_argument("prior_from_labels: empty dataset");
    Vec counts = Vec::Zero(ds.class_count);
    for (int v : *ds.labels) counts(v) += 1.0;
    return Prior(counts / static_cast<double>(n));
}

Vec balancing_weights(const Prior& prior) {
    Vec w(prior.size());
    for (int i = 0; i < prior.size(); ++i) {
        if (!(prior[i] > 0.0))
            throw std::invalid_argument("balancing_weights: undefined for zero prior entry");
        w(i) = 1.0 / prior[i];
    }
    return w;
}

Vec per_example_weights(const Dataset& ds, const Vec& class_weights) {
    if (!ds.labels) throw std::invalid_argument("per_example_weights: dataset has no labels");
    if (class_weights.size() != ds.class_count)
        throw std::invalid_argument("per_example_weights: weight vector length != class_count");
    Vec w(ds.size());
    for (Eigen::Index i = 0; i < ds.size(); ++i) w(i) = class_weights((*ds.labels)[i]);
    return w;
}

}  // namespace probcal
