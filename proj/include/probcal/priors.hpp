#pragma once

#include <vector>

#include "probcal/types.hpp"

namespace probcal::priors {

// Weight-sum prior P_w(i) = sum of weights in class i / total weight.
// Reduces to prior_from_labels when all weights are 1.
Prior weighted_prior(const Dataset& ds);

// Replace the prior baked into prediction rows: divide by the old prior,
// multiply by the new, renormalize each row.
ProbMatrix deweight(const ProbMatrix& probs, const Prior& old_prior, const Prior& new_prior);
ProbMatrix deweight_serial(const ProbMatrix& probs, const Prior& old_prior,
                           const Prior& new_prior);

// Column means of the prediction matrix: the sample-average estimate of
// the prior of the data the model was applied to.
Prior estimate_prior_from_predictions(const ProbMatrix& probs);
Prior estimate_prior_from_predictions_serial(const ProbMatrix& probs);

// Negative log-likelihood of an unlabeled set as a function of the
// candidate prior, up to a candidate-independent constant:
//   -sum_m ln sum_i (candidate_i / model_prior_i) * probs_mi.
// Zero when candidate == model_prior.
double relative_nll(const ProbMatrix& probs, const Prior& model_prior, const Prior& candidate);
double relative_nll_serial(const ProbMatrix& probs, const Prior& model_prior,
                           const Prior& candidate);

// Matrix of second partials of the unlabeled NLL w.r.t. the candidate
// prior; symmetric positive semi-definite, positive definite when the
// prediction rows span all K dimensions.
Eigen::MatrixXd pcp_hessian(const ProbMatrix& probs, const Prior& model_prior,
                            const Prior& candidate);

struct PcpOptions {
    double tol = 1e-8;     // mean absolute deviation between successive priors
    int max_iter = 10000;
    bool newton = false;   // damped-Newton refinement; falls back to the
                           // recursion on any non-decreasing NLL step
};

struct PcpResult {
    Prior prior;
    int iterations = 0;    // accepted prior-changing steps
    bool converged = false;
    std::vector<double> nll_trace;  // relative_nll at init and each iterate
};

// Prediction-consistent prior: fixed point of averaging the deweighted
// prediction rows (half-EM). Classes with model_prior 0 must have all-zero
// prediction columns; they are dropped from the solve and restored as 0.
PcpResult pcp_solve(const ProbMatrix& probs, const Prior& model_prior, const Prior& init,
                    const PcpOptions& opt = {});

}  // namespace probcal::priors
