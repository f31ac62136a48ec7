#include "probcal/mlp.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <stdexcept>

#include <json.hpp>

#include "probcal/parallel.hpp"
#include "probcal/rng.hpp"

namespace probcal::mlp {

namespace {

inline double sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

inline double softplus(double x) {
    return std::log1p(std::exp(-std::fabs(x))) + std::max(x, 0.0);
}

// Per-example head: negative log probability of the label under the
// sequential log-odds convention, plus its gradient w.r.t. the logits.
inline double head_nll_grad(const double* y, const double* b, int k, int label, double* dz) {
    double nll = 0.0;
    const int width = k - 1;
    for (int j = 0; j < width; ++j) dz[j] = 0.0;
    const int lim = std::min(label, width);
    for (int j = 0; j < lim; ++j) {
        const double z = y[j] - b[j];
        nll += softplus(z);
        dz[j] = sigmoid(z);
    }
    if (label < width) {
        const double z = y[label] - b[label];
        nll += softplus(-z);
        dz[label] = sigmoid(z) - 1.0;
    }
    return nll;
}

std::vector<int> chain_dims(int input_dim, const std::vector<int>& hidden, int class_count) {
    std::vector<int> dims;
    dims.push_back(input_dim);
    for (int h : hidden) dims.push_back(h);
    dims.push_back(class_count - 1);
    return dims;
}

int flat_size(const std::vector<int>& dims) {
    int n = 0;
    for (std::size_t l = 0; l + 1 < dims.size(); ++l) n += dims[l] * dims[l + 1] + dims[l + 1];
    return n;
}

}  // namespace

std::string to_string(AugmentConvention c) {
    return c == AugmentConvention::interpolation ? "interpolation" : "mathematician";
}

AugmentConvention convention_from_string(const std::string& s) {
    if (s == "interpolation") return AugmentConvention::interpolation;
    if (s == "mathematician") return AugmentConvention::mathematician;
    throw std::invalid_argument("unknown augmentation convention: " + s);
}

Scaler Scaler::fit(const Mat& features) {
    if (features.rows() < 1) throw std::invalid_argument("Scaler::fit: empty feature matrix");
    Scaler s;
    s.lo = features.colwise().minCoeff();
    s.hi = features.colwise().maxCoeff();
    return s;
}

double Scaler::scale_one(double v, Eigen::Index k) const {
    const double width = hi(k) - lo(k);
    if (width == 0.0) return 0.0;
    return 2.0 * (v - lo(k)) / width - 1.0;
}

Vec Scaler::apply_row(const Eigen::Ref<const Vec>& x) const {
    Vec out(x.size());
    for (Eigen::Index k = 0; k < x.size(); ++k) out(k) = scale_one(x(k), k);
    return out;
}

Mat Scaler::apply(const Mat& features) const {
    if (features.cols() != lo.size())
        throw std::invalid_argument("Scaler::apply: dimension mismatch");
    Mat out(features.rows(), features.cols());
    for (Eigen::Index k = 0; k < features.cols(); ++k) {
        const double width = hi(k) - lo(k);
        if (width == 0.0) {
            out.col(k).setZero();
        } else {
            out.col(k) = (features.col(k).array() - lo(k)) * (2.0 / width) - 1.0;
        }
    }
    return out;
}

int AugmentSpec::output_dim(AugmentConvention c, int d) {
    if (d < 1) throw std::invalid_argument("AugmentSpec: base_dim must be >= 1");
    if (c == AugmentConvention::interpolation) {
        if (d > 12) throw std::invalid_argument("interpolation convention limited to d <= 12");
        long long n = 1;
        for (int i = 0; i < d; ++i) n *= 3;
        return static_cast<int>(n - 1);
    }
    return d * (d + 3) / 2;
}

std::vector<std::vector<int>> monomial_exponents(AugmentConvention c, int d) {
    AugmentSpec::output_dim(c, d);  // bounds check
    std::vector<std::vector<int>> out;
    std::vector<int> expo(static_cast<std::size_t>(d), 0);
    // odometer with n_0 most significant: ascending lexicographic order
    while (true) {
        int pos = d - 1;
        while (pos >= 0 && expo[pos] == 2) {
            expo[pos] = 0;
            --pos;
        }
        if (pos < 0) break;
        ++expo[pos];
        const int total = [&] {
            int t = 0;
            for (int e : expo) t += e;
            return t;
        }();
        if (c == AugmentConvention::mathematician && total > 2) continue;
        out.push_back(expo);
    }
    return out;
}

Vec augment(const Eigen::Ref<const Vec>& x_scaled, const AugmentSpec& spec) {
    if (x_scaled.size() != spec.base_dim)
        throw std::invalid_argument("augment: dimension mismatch");
    const auto monos = monomial_exponents(spec.convention, spec.base_dim);
    Vec out(static_cast<Eigen::Index>(monos.size()));
    for (std::size_t m = 0; m < monos.size(); ++m) {
        double v = 1.0;
        for (int k = 0; k < spec.base_dim; ++k) {
            const int e = monos[m][static_cast<std::size_t>(k)];
            if (e == 1) v *= x_scaled(k);
            else if (e == 2) v *= x_scaled(k) * x_scaled(k);
        }
        out(static_cast<Eigen::Index>(m)) = v;
    }
    return out;
}

Mat augment_matrix(const Mat& scaled, const AugmentSpec& spec) {
    if (scaled.cols() != spec.base_dim)
        throw std::invalid_argument("augment_matrix: dimension mismatch");
    const auto monos = monomial_exponents(spec.convention, spec.base_dim);
    Mat out(scaled.rows(), static_cast<Eigen::Index>(monos.size()));
    par::for_blocks(static_cast<std::size_t>(scaled.rows()),
                    [&](std::size_t lo, std::size_t hi, std::size_t) {
                        for (std::size_t r = lo; r < hi; ++r) {
                            const auto ri = static_cast<Eigen::Index>(r);
                            for (std::size_t m = 0; m < monos.size(); ++m) {
                                double v = 1.0;
                                for (int k = 0; k < spec.base_dim; ++k) {
                                    const int e = monos[m][static_cast<std::size_t>(k)];
                                    if (e == 1) v *= scaled(ri, k);
                                    else if (e == 2) v *= scaled(ri, k) * scaled(ri, k);
                                }
                                out(ri, static_cast<Eigen::Index>(m)) = v;
                            }
                        }
                    });
    return out;
}

Vec head_offsets(int class_count) {
    if (class_count < 2) throw std::invalid_argument("head_offsets: class_count must be >= 2");
    Vec b(class_count - 1);
    for (int i = 0; i < class_count - 1; ++i) b(i) = std::log(static_cast<double>(class_count - 1 - i));
    return b;
}

Vec logits_to_probs(const Eigen::Ref<const Vec>& y, const Eigen::Ref<const Vec>& offsets) {
    if (y.size() != offsets.size()) throw std::invalid_argument("logits_to_probs: size mismatch");
    const auto k = y.size() + 1;
    Vec probs(k);
    double carry = 1.0;
    double head_sum = 0.0;
    for (Eigen::Index i = 0; i < k - 1; ++i) {
        const double s = sigmoid(y(i) - offsets(i));
        probs(i) = carry * s;
        head_sum += probs(i);
        carry *= (1.0 - s);
    }
    // last entry by complement so the row sums to 1
    probs(k - 1) = std::max(0.0, 1.0 - head_sum);
    return probs;
}

Vec logits_to_probs_softmax(const Eigen::Ref<const Vec>& y) {
    const double mx = y.maxCoeff();
    Vec e = (y.array() - mx).exp();
    return e / e.sum();
}

int MlpModel::param_count() const {
    int n = 0;
    for (std::size_t l = 0; l < weights.size(); ++l)
        n += static_cast<int>(weights[l].size() + biases[l].size());
    return n;
}

std::vector<int> MlpModel::layer_sizes() const {
    std::vector<int> dims;
    dims.push_back(static_cast<int>(weights.front().cols()));
    for (const auto& w : weights) dims.push_back(static_cast<int>(w.rows()));
    return dims;
}

Vec MlpModel::flatten() const {
    Vec theta(param_count());
    Eigen::Index at = 0;
    for (std::size_t l = 0; l < weights.size(); ++l) {
        std::memcpy(theta.data() + at, weights[l].data(), sizeof(double) * weights[l].size());
        at += weights[l].size();
        std::memcpy(theta.data() + at, biases[l].data(), sizeof(double) * biases[l].size());
        at += biases[l].size();
    }
    return theta;
}

void MlpModel::unflatten(const Eigen::Ref<const Vec>& theta) {
    if (theta.size() != param_count()) throw std::invalid_argument("unflatten: size mismatch");
    Eigen::Index at = 0;
    for (std::size_t l = 0; l < weights.size(); ++l) {
        std::memcpy(weights[l].data(), theta.data() + at, sizeof(double) * weights[l].size());
        at += weights[l].size();
        std::memcpy(biases[l].data(), theta.data() + at, sizeof(double) * biases[l].size());
        at += biases[l].size();
    }
}

Vec MlpModel::forward(const Eigen::Ref<const Vec>& x_raw) const {
    if (x_raw.size() != augment_spec.base_dim)
        throw std::invalid_argument("forward: dimension mismatch");
    Vec a = augment(scaler.apply_row(x_raw), augment_spec);
    for (std::size_t l = 0; l < weights.size(); ++l) {
        Vec z = weights[l] * a + biases[l];
        if (l + 1 < weights.size()) z = z.cwiseMax(0.0);
        a = std::move(z);
    }
    return a;
}

int param_count(int base_dim, AugmentConvention conv, const std::vector<int>& hidden,
                int class_count) {
    if (class_count < 2) throw std::invalid_argument("param_count: class_count must be >= 2");
    return flat_size(chain_dims(AugmentSpec::output_dim(conv, base_dim), hidden, class_count));
}

void TrainConfig::validate() const {
    for (int h : hidden_sizes)
        if (h < 1) throw std::invalid_argument("TrainConfig: hidden sizes must be positive");
    if (!(learning_rate > 0.0)) throw std::invalid_argument("TrainConfig: learning_rate must be > 0");
    if (weight_decay < 0.0) throw std::invalid_argument("TrainConfig: weight_decay must be >= 0");
    if (max_iters < 1) throw std::invalid_argument("TrainConfig: max_iters must be >= 1");
    if (!(loss_tol > 0.0)) throw std::invalid_argument("TrainConfig: loss_tol must be > 0");
    if (restarts < 1) throw std::invalid_argument("TrainConfig: restarts must be >= 1");
}

namespace {

// Shared state for full-batch loss/gradient evaluations over a fixed
// augmented design matrix.
struct EvalContext {
    const Mat& x;  // N x A
    const std::vector<int>& labels;
    const Vec* w = nullptr;
    double total_weight = 0.0;
    std::vector<int> dims;  // A, hidden..., K-1
    Vec offsets;
    int class_count = 0;
    double lambda = 0.0;
    int np = 0;

    struct Partial {
        double loss = 0.0;
        Vec grad;
    };

    std::pair<double, Vec> eval(const Vec& theta) const {
        const auto n = static_cast<std::size_t>(x.rows());
        const int layers = static_cast<int>(dims.size()) - 1;

        Partial init;
        init.grad = Vec::Zero(np);
        Partial total = par::reduce_blocks<Partial>(
            n, init,
            [&](std::size_t lo, std::size_t hi, Partial& p) { eval_block(theta, lo, hi, p); },
            [](Partial& acc, const Partial& p) {
                acc.loss += p.loss;
                acc.grad += p.grad;
            });

        (void)layers;
        double loss = total.loss / total_weight;
        Vec grad = total.grad / total_weight;
        if (lambda > 0.0) {
            loss += 0.5 * lambda / np * theta.squaredNorm();
            grad += (lambda / np) * theta;
        }
        return {loss, std::move(grad)};
    }

    void eval_block(const Vec& theta, std::size_t lo, std::size_t hi, Partial& p) const {
        const auto b = static_cast<Eigen::Index>(hi - lo);
        const int layers = static_cast<int>(dims.size()) - 1;
        const int width = class_count - 1;

        // layer views into the flat parameter vector
        std::vector<Eigen::Map<const Mat>> wv;
        std::vector<Eigen::Map<const Vec>> bv;
        std::vector<Eigen::Map<Mat>> gw;
        std::vector<Eigen::Map<Vec>> gb;
        Eigen::Index at = 0;
        for (int l = 0; l < layers; ++l) {
            const Eigen::Index in = dims[static_cast<std::size_t>(l)];
            const Eigen::Index out = dims[static_cast<std::size_t>(l) + 1];
            wv.emplace_back(theta.data() + at, out, in);
            gw.emplace_back(p.grad.data() + at, out, in);
            at += out * in;
            bv.emplace_back(theta.data() + at, out);
            gb.emplace_back(p.grad.data() + at, out);
            at += out;
        }

        // forward
        std::vector<Mat> act(static_cast<std::size_t>(layers));
        const auto xb = x.middleRows(static_cast<Eigen::Index>(lo), b);
        for (int l = 0; l < layers; ++l) {
            const auto& input = (l == 0) ? xb : act[static_cast<std::size_t>(l - 1)];
            act[static_cast<std::size_t>(l)].noalias() = input * wv[static_cast<std::size_t>(l)].transpose();
            act[static_cast<std::size_t>(l)].rowwise() += bv[static_cast<std::size_t>(l)].transpose();
            if (l + 1 < layers)
                act[static_cast<std::size_t>(l)] = act[static_cast<std::size_t>(l)].cwiseMax(0.0);
        }

        // head: loss and gradient w.r.t. logits
        Mat dz(b, width);
        const Mat& logits = act[static_cast<std::size_t>(layers - 1)];
        for (Eigen::Index r = 0; r < b; ++r) {
            const auto row = static_cast<std::size_t>(lo) + static_cast<std::size_t>(r);
            const double nll = head_nll_grad(logits.row(r).data(), offsets.data(), class_count,
                                             labels[row], dz.row(r).data());
            const double wn = w ? (*w)(static_cast<Eigen::Index>(row)) : 1.0;
            p.loss += wn * nll;
            if (wn != 1.0) dz.row(r) *= wn;
        }

        // backward
        Mat delta = std::move(dz);
        for (int l = layers - 1; l >= 0; --l) {
            const auto& input = (l == 0) ? xb : act[static_cast<std::size_t>(l - 1)];
            gw[static_cast<std::size_t>(l)].noalias() += delta.transpose() * input;
            gb[static_cast<std::size_t>(l)] += delta.colwise().sum();
            if (l > 0) {
                Mat next(b, dims[static_cast<std::size_t>(l)]);
                next.noalias() = delta * wv[static_cast<std::size_t>(l)];
                // ReLU mask: post-activation > 0
                next.array() *= (act[static_cast<std::size_t>(l - 1)].array() > 0.0).cast<double>();
                delta = std::move(next);
            }
        }
    }
};

Vec resolve_weights(const Dataset& ds, const Vec* weights) {
    if (weights) {
        if (weights->size() != ds.size())
            throw std::invalid_argument("weights length does not match dataset");
        return *weights;
    }
    if (ds.weights) return *ds.weights;
    return Vec::Ones(ds.size());
}

}  // namespace

std::pair<double, Vec> loss_and_gradient(const MlpModel& model, const Dataset& ds,
                                         const Vec* weights, double weight_decay) {
    if (!ds.labels) throw std::invalid_argument("loss: dataset has no labels");
    const Vec w = resolve_weights(ds, weights);
    const Mat x = augment_matrix(model.scaler.apply(ds.features), model.augment_spec);
    EvalContext ctx{x,             *ds.labels,   &w, w.sum(), model.layer_sizes(),
                    model.offsets, model.class_count, weight_decay, model.param_count()};
    return ctx.eval(model.flatten());
}

double loss(const MlpModel& model, const Dataset& ds, const Vec* weights, double weight_decay) {
    return loss_and_gradient(model, ds, weights, weight_decay).first;
}

std::pair<double, Vec> loss_and_gradient_serial(const MlpModel& model, const Dataset& ds,
                                                const Vec* weights, double weight_decay) {
    if (!ds.labels) throw std::invalid_argument("loss: dataset has no labels");
    const Vec w = resolve_weights(ds, weights);
    const double total_weight = w.sum();
    const int layers = static_cast<int>(model.weights.size());
    const int width = model.class_count - 1;

    double loss_sum = 0.0;
    std::vector<Mat> gw(model.weights.size());
    std::vector<Vec> gb(model.biases.size());
    for (int l = 0; l < layers; ++l) {
        gw[static_cast<std::size_t>(l)] = Mat::Zero(model.weights[static_cast<std::size_t>(l)].rows(),
                                                    model.weights[static_cast<std::size_t>(l)].cols());
        gb[static_cast<std::size_t>(l)] = Vec::Zero(model.biases[static_cast<std::size_t>(l)].size());
    }

    std::vector<Vec> act(static_cast<std::size_t>(layers));
    Vec dz(width);
    for (Eigen::Index n = 0; n < ds.size(); ++n) {
        Vec a = augment(model.scaler.apply_row(ds.features.row(n).transpose()), model.augment_spec);
        for (int l = 0; l < layers; ++l) {
            Vec z = model.weights[static_cast<std::size_t>(l)] * (l == 0 ? a : act[static_cast<std::size_t>(l - 1)]) +
                    model.biases[static_cast<std::size_t>(l)];
            if (l + 1 < layers) z = z.cwiseMax(0.0);
            act[static_cast<std::size_t>(l)] = std::move(z);
        }
        const double nll = head_nll_grad(act[static_cast<std::size_t>(layers - 1)].data(),
                                         model.offsets.data(), model.class_count,
                                         (*ds.labels)[n], dz.data());
        const double wn = w(n);
        loss_sum += wn * nll;
        Vec delta = wn * dz;
        for (int l = layers - 1; l >= 0; --l) {
            const Vec& input = (l == 0) ? a : act[static_cast<std::size_t>(l - 1)];
            gw[static_cast<std::size_t>(l)] += delta * input.transpose();
            gb[static_cast<std::size_t>(l)] += delta;
            if (l > 0) {
                Vec next = model.weights[static_cast<std::size_t>(l)].transpose() * delta;
                next.array() *= (act[static_cast<std::size_t>(l - 1)].array() > 0.0).cast<double>();
                delta = std::move(next);
            }
        }
    }

    MlpModel g = model;
    g.weights = std::move(gw);
    g.biases = std::move(gb);
    double total_loss = loss_sum / total_weight;
    Vec grad = g.flatten() / total_weight;
    if (weight_decay > 0.0) {
        const Vec theta = model.flatten();
        const int np = model.param_count();
        total_loss += 0.5 * weight_decay / np * theta.squaredNorm();
        grad += (weight_decay / np) * theta;
    }
    return {total_loss, std::move(grad)};
}

void AdamState::init(Eigen::Index n) {
    m = Vec::Zero(n);
    v = Vec::Zero(n);
}

void AdamState::step(Vec& theta, const Vec& grad, double lr, int t) {
    m = beta1 * m + (1.0 - beta1) * grad;
    v = beta2 * v + (1.0 - beta2) * grad.cwiseProduct(grad);
    const double bc1 = 1.0 - std::pow(beta1, t);
    const double bc2 = 1.0 - std::pow(beta2, t);
    theta.array() -= lr * (m.array() / bc1) / ((v.array() / bc2).sqrt() + eps);
}

MlpModel train(const Dataset& ds, const TrainConfig& cfg, const Vec* weights,
               TrainReport* report) {
    cfg.validate();
    if (!ds.labels) throw std::invalid_argument("train: dataset has no labels");
    if (ds.size() < ds.class_count)
        throw std::invalid_argument("train: need at least one example per class count");

    MlpModel model;
    model.scaler = Scaler::fit(ds.features);
    model.augment_spec = {cfg.convention, ds.dim()};
    model.class_count = ds.class_count;
    model.offsets = head_offsets(ds.class_count);
    const std::vector<int> dims = chain_dims(model.augment_spec.output_dim(), cfg.hidden_sizes,
                                             ds.class_count);
    for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
        model.weights.emplace_back(Mat::Zero(dims[l + 1], dims[l]));
        model.biases.emplace_back(Vec::Zero(dims[l + 1]));
    }
    const int np = model.param_count();

    const Vec w = resolve_weights(ds, weights);
    const Mat x = augment_matrix(model.scaler.apply(ds.features), model.augment_spec);
    EvalContext ctx{x,   *ds.labels,     &w,   w.sum(), dims, model.offsets,
                    ds.class_count, cfg.weight_decay, np};

    TrainReport local;
    TrainReport& rep = report ? *report : local;
    rep = TrainReport{};

    Vec best_theta;
    double best_loss = std::numeric_limits<double>::infinity();

    for (int r = 0; r < cfg.restarts; ++r) {
        // fresh seeded initialization: uniform +-1/sqrt(fan_in) per layer
        rng::Xoshiro256pp gen(rng::derive_seed(cfg.seed, static_cast<std::uint64_t>(r)));
        Vec theta(np);
        Eigen::Index at = 0;
        for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
            const double bound = 1.0 / std::sqrt(static_cast<double>(dims[l]));
            const Eigen::Index count = static_cast<Eigen::Index>(dims[l]) * dims[l + 1] + dims[l + 1];
            for (Eigen::Index i = 0; i < count; ++i)
                theta(at + i) = bound * (2.0 * gen.uniform01() - 1.0);
            at += count;
        }

        AdamState adam;
        adam.init(np);
        double prev = std::numeric_limits<double>::infinity();
        double run_best = std::numeric_limits<double>::infinity();
        Vec run_best_theta = theta;
        int steps = 0;
        bool aborted = false;

        for (int it = 0;; ++it) {
            auto [cur, grad] = ctx.eval(theta);
            if (!std::isfinite(cur)) {
                aborted = true;
                break;
            }
            if (cur < run_best) {
                run_best = cur;
                run_best_theta = theta;
            }
            if (prev - cur < cfg.loss_tol) break;  // includes non-improving steps
            if (it == cfg.max_iters) break;
            prev = cur;
            adam.step(theta, grad, cfg.learning_rate, it + 1);
            ++steps;
        }

        rep.restart_losses.push_back(run_best);
        rep.restart_iters.push_back(steps);
        if (aborted) {
            rep.aborted_restarts.push_back(r);
            continue;
        }
        if (run_best < best_loss) {
            best_loss = run_best;
            best_theta = run_best_theta;
            rep.chosen_restart = r;
        }
    }

    if (!std::isfinite(best_loss))
        throw std::runtime_error("train: every restart hit a non-finite loss (aborted restarts: " +
                                 std::to_string(rep.aborted_restarts.size()) + ")");
    model.unflatten(best_theta);
    return model;
}

namespace {

ProbMatrix predict_impl(const MlpModel& model, const Dataset& ds, bool parallel) {
    if (ds.dim() != model.augment_spec.base_dim)
        throw std::invalid_argument("predict: feature dimension mismatch");
    const int k = model.class_count;
    Mat probs(ds.size(), k);
    auto body = [&](std::size_t lo, std::size_t hi, std::size_t) {
        for (std::size_t r = lo; r < hi; ++r) {
            const auto ri = static_cast<Eigen::Index>(r);
            const Vec y = model.forward(ds.features.row(ri).transpose());
            probs.row(ri) = logits_to_probs(y, model.offsets).transpose();
        }
    };
    if (parallel) {
        par::for_blocks(static_cast<std::size_t>(ds.size()), body);
    } else {
        body(0, static_cast<std::size_t>(ds.size()), 0);
    }
    return ProbMatrix::checked(std::move(probs), 1e-12);
}

}  // namespace

ProbMatrix predict(const MlpModel& model, const Dataset& ds) { return predict_impl(model, ds, true); }
ProbMatrix predict_serial(const MlpModel& model, const Dataset& ds) {
    return predict_impl(model, ds, false);
}

void save_model(const MlpModel& model, const std::string& path, const TrainConfig* cfg) {
    nlohmann::json j;
    j["format"] = "probcal-mlp-v1";
    j["class_count"] = model.class_count;
    j["convention"] = to_string(model.augment_spec.convention);
    j["base_dim"] = model.augment_spec.base_dim;
    j["scaler"]["lo"] = std::vector<double>(model.scaler.lo.data(),
                                            model.scaler.lo.data() + model.scaler.lo.size());
    j["scaler"]["hi"] = std::vector<double>(model.scaler.hi.data(),
                                            model.scaler.hi.data() + model.scaler.hi.size());
    j["layer_sizes"] = model.layer_sizes();
    const Vec theta = model.flatten();
    j["parameters"] = std::vector<double>(theta.data(), theta.data() + theta.size());
    j["head_offsets"] = std::vector<double>(model.offsets.data(),
                                            model.offsets.data() + model.offsets.size());
    if (cfg) {
        j["train_config"]["hidden_sizes"] = cfg->hidden_sizes;
        j["train_config"]["learning_rate"] = cfg->learning_rate;
        j["train_config"]["weight_decay"] = cfg->weight_decay;
        j["train_config"]["max_iters"] = cfg->max_iters;
        j["train_config"]["loss_tol"] = cfg->loss_tol;
        j["train_config"]["restarts"] = cfg->restarts;
        j["train_config"]["seed"] = cfg->seed;
        j["train_config"]["convention"] = to_string(cfg->convention);
    }
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write model file: " + path);
    out << j.dump(2) << "\n";
}

MlpModel load_model(const std::string& path, TrainConfig* cfg_out) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open model file: " + path);
    nlohmann::json j;
    in >> j;
    if (j.value("format", "") != "probcal-mlp-v1")
        throw std::runtime_error("unrecognized model file format");

    MlpModel model;
    model.class_count = j.at("class_count").get<int>();
    model.augment_spec.convention = convention_from_string(j.at("convention").get<std::string>());
    model.augment_spec.base_dim = j.at("base_dim").get<int>();
    const auto lo = j.at("scaler").at("lo").get<std::vector<double>>();
    const auto hi = j.at("scaler").at("hi").get<std::vector<double>>();
    model.scaler.lo = Eigen::Map<const Vec>(lo.data(), static_cast<Eigen::Index>(lo.size()));
    model.scaler.hi = Eigen::Map<const Vec>(hi.data(), static_cast<Eigen::Index>(hi.size()));
    const auto sizes = j.at("layer_sizes").get<std::vector<int>>();
    if (sizes.size() < 2 || sizes.front() != model.augment_spec.output_dim() ||
        sizes.back() != model.class_count - 1)
        throw std::runtime_error("model file has inconsistent layer sizes");
    for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
        model.weights.emplace_back(Mat::Zero(sizes[l + 1], sizes[l]));
        model.biases.emplace_back(Vec::Zero(sizes[l + 1]));
    }
    const auto params = j.at("parameters").get<std::vector<double>>();
    if (static_cast<int>(params.size()) != model.param_count())
        throw std::runtime_error("model file parameter count mismatch");
    model.unflatten(Eigen::Map<const Vec>(params.data(), static_cast<Eigen::Index>(params.size())));
    const auto offs = j.at("head_offsets").get<std::vector<double>>();
    model.offsets = Eigen::Map<const Vec>(offs.data(), static_cast<Eigen::Index>(offs.size()));

    if (cfg_out && j.contains("train_config")) {
        const auto& t = j["train_config"];
        cfg_out->hidden_sizes = t.at("hidden_sizes").get<std::vector<int>>();
        cfg_out->learning_rate = t.at("learning_rate").get<double>();
        cfg_out->weight_decay = t.at("weight_decay").get<double>();
        cfg_out->max_iters = t.at("max_iters").get<int>();
        cfg_out->loss_tol = t.at("loss_tol").get<double>();
        cfg_out->restarts = t.at("restarts").get<int>();
        cfg_out->seed = t.at("seed").get<std::uint64_t>();
        cfg_out->convention = convention_from_string(t.at("convention").get<std::string>());
    }
    return model;
}

}  // namespace probcal::mlp
