#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "probcal/types.hpp"

namespace probcal::mlp {

// Second-order polynomial feature sets: interpolation keeps every monomial
// with per-exponent <= 2 (3^d - 1 terms); mathematician keeps total degree
// 1 or 2 (d(d+3)/2 terms).
enum class AugmentConvention { interpolation, mathematician };

std::string to_string(AugmentConvention c);
AugmentConvention convention_from_string(const std::string& s);

// Per-feature affine map fitted so the training range lands on [-1, 1].
// A zero-width feature maps to 0. Later data reuses the same map and may
// leave [-1, 1].
struct Scaler {
    Vec lo, hi;

    static Scaler fit(const Mat& features);
    Mat apply(const Mat& features) const;
    double scale_one(double v, Eigen::Index k) const;
    Vec apply_row(const Eigen::Ref<const Vec>& x) const;
};

struct AugmentSpec {
    AugmentConvention convention = AugmentConvention::interpolation;
    int base_dim = 0;

    static int output_dim(AugmentConvention c, int d);
    int output_dim() const { return output_dim(convention, base_dim); }
};

// Exponent tuples (n_0 ... n_{d-1}) in ascending lexicographic order; the
// all-zero tuple is excluded.
std::vector<std::vector<int>> monomial_exponents(AugmentConvention c, int d);

Vec augment(const Eigen::Ref<const Vec>& x_scaled, const AugmentSpec& spec);
Mat augment_matrix(const Mat& scaled, const AugmentSpec& spec);

// Sequential log-odds head: offsets b_i = ln(K-1-i) make the all-zero
// network predict the uniform distribution.
Vec head_offsets(int class_count);
Vec logits_to_probs(const Eigen::Ref<const Vec>& y, const Eigen::Ref<const Vec>& offsets);
Vec logits_to_probs_softmax(const Eigen::Ref<const Vec>& y);

struct MlpModel {
    Scaler scaler;
    AugmentSpec augment_spec;
    int class_count = 0;
    std::vector<Mat> weights;  // layer l: out x in
    std::vector<Vec> biases;   // layer l: out
    Vec offsets;               // head offsets, fixed constants (not parameters)

    int param_count() const;
    std::vector<int> layer_sizes() const;  // input width, hidden..., K-1
    Vec flatten() const;
    void unflatten(const Eigen::Ref<const Vec>& theta);

    // Raw feature vector -> logits (scale, augment, affine/ReLU stack).
    Vec forward(const Eigen::Ref<const Vec>& x_raw) const;
};

// Trainable parameter count for an architecture (head offsets excluded).
int param_count(int base_dim, AugmentConvention conv, const std::vector<int>& hidden,
                int class_count);

struct TrainConfig {
    std::vector<int> hidden_sizes{32};
    double learning_rate = 2e-3;
    double weight_decay = 1e-4;  // lambda; enters the loss as lambda/(2 Np) * sum(theta^2)
    int max_iters = 25000;
    double loss_tol = 1e-8;  // stop when an Adam step improves the loss by less than this
    int restarts = 5;
    std::uint64_t seed = 0;
    AugmentConvention convention = AugmentConvention::interpolation;

    void validate() const;
};

// Weighted mean cross-entropy plus weight decay lambda/(2 Np) * sum(theta^2).
// Weight resolution: explicit argument, else dataset weights, else all ones.
double loss(const MlpModel& model, const Dataset& ds, const Vec* weights = nullptr,
            double weight_decay = 0.0);
std::pair<double, Vec> loss_and_gradient(const MlpModel& model, const Dataset& ds,
                                         const Vec* weights = nullptr,
                                         double weight_decay = 0.0);
std::pair<double, Vec> loss_and_gradient_serial(const MlpModel& model, const Dataset& ds,
                                                const Vec* weights = nullptr,
                                                double weight_decay = 0.0);

struct TrainReport {
    std::vector<double> restart_losses;  // best loss seen per restart
    std::vector<int> restart_iters;      // Adam steps taken per restart
    std::vector<int> aborted_restarts;   // restarts that hit a non-finite loss
    int chosen_restart = -1;
};

// Full-batch Adam with seeded random restarts; keeps the lowest-loss model.
MlpModel train(const Dataset& ds, const TrainConfig& cfg, const Vec* weights = nullptr,
               TrainReport* report = nullptr);

ProbMatrix predict(const MlpModel& model, const Dataset& ds);
ProbMatrix predict_serial(const MlpModel& model, const Dataset& ds);

// Model file: scaler ranges, convention, layer sizes, flat parameters,
// head offsets, class count, and the train config that produced it.
void save_model(const MlpModel& model, const std::string& path,
                const TrainConfig* cfg = nullptr);
MlpModel load_model(const std::string& path, TrainConfig* cfg_out = nullptr);

// Exposed for the training loop and its tests: one Adam update.
struct AdamState {
    Vec m, v;
    double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
    void init(Eigen::Index n);
    void step(Vec& theta, const Vec& grad, double lr, int t);
};

}  // namespace probcal::mlp
