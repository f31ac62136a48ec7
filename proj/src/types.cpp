#include "probcal/types.hpp"

#include <cmath>
#include <stdexcept>

namespace probcal {

void Dataset::validate() const {
    if (class_count < 2) throw std::invalid_argument("Dataset: class_count must be >= 2");
    if (features.cols() < 1) throw std::invalid_argument("Dataset: feature dimension must be >= 1");
    if (labels) {
        if (static_cast<Eigen::Index>(labels->size()) != features.rows())
            throw std::invalid_argument("Dataset: label count does not match row count");
        for (int v : *labels) {
            if (v < 0 || v >= class_count)
                throw std::invalid_argument("Dataset: label out of range [0, class_count)");
        }
    }
    if (weights) {
        if (weights->size() != features.rows())
            throw std::invalid_argument("Dataset: weight count does not match row count");
        for (Eigen::Index i = 0; i < weights->size(); ++i) {
            if (!((*weights)(i) > 0.0) || !std::isfinite((*weights)(i)))
                throw std::invalid_argument("Dataset: weights must be positive and finite");
        }
    }
    if (!features.allFinite()) throw std::invalid_argument("Dataset: non-finite feature value");
}

Prior::Prior(Vec p) : p_(std::move(p)) {
    if (p_.size() < 1) throw std::invalid_argument("Prior: empty vector");
    for (Eigen::Index i = 0; i < p_.size(); ++i) {
        if (!(p_(i) >= 0.0) || !std::isfinite(p_(i)))
            throw std::invalid_argument("Prior: entries must be finite and >= 0");
    }
    if (std::fabs(p_.sum() - 1.0) > kSumTol)
        throw std::invalid_argument("Prior: entries must sum to 1 within 1e-12");
}

Prior Prior::uniform(int k) {
    if (k < 1) throw std::invalid_argument("Prior::uniform: k must be >= 1");
    return Prior(Vec::Constant(k, 1.0 / k));
}

ProbCheck validate_probabilities(const Mat& p, double tol) {
    ProbCheck out;
    if (p.size() == 0) return out;
    out.min_entry = p.minCoeff();
    out.max_entry = p.maxCoeff();
    out.max_row_deviation = (p.rowwise().sum().array() - 1.0).abs().maxCoeff();
    out.pass = out.min_entry >= -tol && out.max_entry <= 1.0 + tol && out.max_row_deviation <= tol;
    return out;
}

ProbMatrix ProbMatrix::checked(Mat p, double tol) {
    const ProbCheck chk = validate_probabilities(p, tol);
    if (!chk.pass)
        throw std::invalid_argument("ProbMatrix: invariants violated (max row deviation " +
                                    std::to_string(chk.max_row_deviation) + ")");
    return ProbMatrix(std::move(p), false);
}

ProbMatrix ProbMatrix::ingest(Mat p) {
    ProbCheck chk = validate_probabilities(p, kRowSumTol);
    if (chk.pass) return ProbMatrix(std::move(p), false);
    if (chk.min_entry < 0.0 || chk.max_entry > 1.0 + kRenormLimit)
        throw std::invalid_argument("ProbMatrix: entries outside [0,1]");
    if (chk.max_row_deviation >= kRenormLimit)
        throw std::invalid_argument("ProbMatrix: row sum deviation " +
                                    std::to_string(chk.max_row_deviation) +
                                    " exceeds the 1e-6 renormalization limit");
    for (Eigen::Index r = 0; r < p.rows(); ++r) {
        const double s = p.row(r).sum();
        if (!(s > 0.0)) throw std::invalid_argument("ProbMatrix: zero row sum");
        p.row(r) /= s;
    }
    return ProbMatrix(std::move(p), true);
}

}  // namespace probcal
