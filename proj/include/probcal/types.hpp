#pragma once

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace probcal {

using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vec = Eigen::VectorXd;

// Feature matrix with optional class labels and per-example weights.
// Labels are dense integers 0..K-1; string class names live in the
// sidecar manifest, not here.
struct Dataset {
    Mat features;                             // N x d
    std::optional<std::vector<int>> labels;   // length N, values in [0, class_count)
    std::optional<Vec> weights;               // length N, strictly positive
    int class_count = 0;                      // K >= 2

    Eigen::Index size() const { return features.rows(); }
    int dim() const { return static_cast<int>(features.cols()); }

    // Throws std::invalid_argument on any invariant violation.
    void validate() const;
};

// K-vector on the probability simplex: entries >= 0, sum within 1e-12 of 1.
class Prior {
public:
    explicit Prior(Vec p);
    static Prior uniform(int k);

    const Vec& values() const { return p_; }
    double operator[](Eigen::Index i) const { return p_(i); }
    int size() const { return static_cast<int>(p_.size()); }

    static constexpr double kSumTol = 1e-12;

private:
    Vec p_;
};

struct ProbCheck {
    double max_row_deviation = 0.0;  // max |row sum - 1|
    double min_entry = 0.0;
    double max_entry = 0.0;
    bool pass = true;
};

// Pure report: row-sum deviations and entry range of a candidate
// probability matrix at the given tolerance.
ProbCheck validate_probabilities(const Mat& p, double tol);

// Row-stochastic N x K matrix of class probabilities.
class ProbMatrix {
public:
    // Accepts the matrix if it already satisfies the invariants at `tol`.
    static ProbMatrix checked(Mat p, double tol = 1e-9);

    // Ingestion rule for external catalogs: renormalize rows when the
    // worst deviation is below 1e-6, hard error above.
    static ProbMatrix ingest(Mat p);

    const Mat& values() const { return p_; }
    Eigen::Index rows() const { return p_.rows(); }
    int class_count() const { return static_cast<int>(p_.cols()); }
    bool renormalized() const { return renormalized_; }

    static constexpr double kRowSumTol = 1e-9;
    static constexpr double kRenormLimit = 1e-6;

private:
    explicit ProbMatrix(Mat p, bool renormalized) : p_(std::move(p)), renormalized_(renormalized) {}
    Mat p_;
    bool renormalized_ = false;
};

}  // namespace probcal
