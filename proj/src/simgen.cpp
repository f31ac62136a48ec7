#include "probcal/simgen.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

#include "probcal/parallel.hpp"
#include "probcal/rng.hpp"

namespace probcal::simgen {

namespace {
constexpr double kHalfLog2Pi = 0.9189385332046727;  // 0.5 * ln(2*pi)
}

void SimConfig::validate() const {
    if (classes.size() < 2) throw std::invalid_argument("SimConfig: need at least 2 classes");
    if (fractions.size() != static_cast<Eigen::Index>(classes.size()))
        throw std::invalid_argument("SimConfig: fractions length != class count");
    Prior check(fractions);  // simplex invariants
    const int d = dim();
    for (const auto& c : classes) {
        if (c.mean.size() != d || c.sigma.size() != d)
            throw std::invalid_argument("SimConfig: class specs must share one dimension");
        for (Eigen::Index k = 0; k < c.sigma.size(); ++k)
            if (!(c.sigma(k) > 0.0)) throw std::invalid_argument("SimConfig: sigma must be > 0");
    }
    if (n_points < 0) throw std::invalid_argument("SimConfig: n_points must be >= 0");
}

SimConfig default_spec(SimKind kind, std::int64_t n_points, std::uint64_t seed) {
    SimConfig cfg;
    cfg.classes.resize(3);
    cfg.classes[0] = {Vec::Zero(4), Vec::Ones(4)};
    cfg.classes[1] = {(Vec(4) << 1.0, 0.5, 0.0, 0.0).finished(), Vec::Ones(4)};
    cfg.classes[2] = {(Vec(4) << -0.75, -0.5, 0.0, 0.0).finished(),
                      (Vec(4) << 1.0, 1.0, 2.0, 1.0).finished()};
    if (kind == SimKind::representative) {
        cfg.fractions = (Vec(3) << 0.6, 0.38, 0.02).finished();
    } else {
        cfg.fractions = Vec::Constant(3, 1.0 / 3.0);
    }
    cfg.n_points = n_points;
    cfg.seed = seed;
    return cfg;
}

namespace {

// One row: label from a single uniform (inverse-CDF walk), then d normals.
void sample_row(const SimConfig& cfg, std::uint64_t row, double* features, int* label) {
    auto gen = rng::row_stream(cfg.seed, row);
    const double u = gen.uniform01();
    const int k = cfg.class_count();
    int cls = k - 1;
    double c = 0.0;
    for (int i = 0; i < k; ++i) {
        c += cfg.fractions(i);
        if (u < c) {
            cls = i;
            break;
        }
    }
    const auto& spec = cfg.classes[cls];
    for (int d = 0; d < cfg.dim(); ++d)
        features[d] = spec.mean(d) + spec.sigma(d) * gen.normal();
    *label = cls;
}

Dataset sample_impl(const SimConfig& cfg, bool parallel) {
    cfg.validate();
    Dataset ds;
    const auto n = cfg.n_points;
    ds.class_count = cfg.class_count();
    ds.features.resize(n, cfg.dim());
    std::vector<int> labels(static_cast<std::size_t>(n));
    auto body = [&](std::size_t lo, std::size_t hi, std::size_t) {
        for (std::size_t r = lo; r < hi; ++r)
            sample_row(cfg, r, ds.features.row(static_cast<Eigen::Index>(r)).data(), &labels[r]);
    };
    if (parallel) {
        par::for_blocks(static_cast<std::size_t>(n), body);
    } else {
        body(0, static_cast<std::size_t>(n), 0);
    }
    ds.labels = std::move(labels);
    return ds;
}

void log_mixture_weights(const SimConfig& cfg, const double* x, double* logw) {
    const int k = cfg.class_count();
    const int d = cfg.dim();
    for (int i = 0; i < k; ++i) {
        double acc = std::log(cfg.fractions(i));
        const auto& spec = cfg.classes[i];
        for (int j = 0; j < d; ++j) {
            const double z = (x[j] - spec.mean(j)) / spec.sigma(j);
            acc -= std::log(spec.sigma(j)) + kHalfLog2Pi + 0.5 * z * z;
        }
        logw[i] = acc;
    }
}

void posterior_from_logw(double* logw, int k, double* out) {
    double mx = logw[0];
    for (int i = 1; i < k; ++i) mx = std::max(mx, logw[i]);
    double sum = 0.0;
    for (int i = 0; i < k; ++i) {
        out[i] = std::exp(logw[i] - mx);
        sum += out[i];
    }
    for (int i = 0; i < k; ++i) out[i] /= sum;
}

ProbMatrix oracle_impl(const SimConfig& cfg, const Dataset& ds, bool parallel) {
    cfg.validate();
    if (ds.dim() != cfg.dim())
        throw std::invalid_argument("oracle_matrix: feature dimension mismatch");
    const int k = cfg.class_count();
    Mat p(ds.size(), k);
    auto body = [&](std::size_t lo, std::size_t hi, std::size_t) {
        std::vector<double> logw(static_cast<std::size_t>(k));
        for (std::size_t r = lo; r < hi; ++r) {
            const auto ri = static_cast<Eigen::Index>(r);
            log_mixture_weights(cfg, ds.features.row(ri).data(), logw.data());
            posterior_from_logw(logw.data(), k, p.row(ri).data());
        }
    };
    if (parallel) {
        par::for_blocks(static_cast<std::size_t>(ds.size()), body);
    } else {
        body(0, static_cast<std::size_t>(ds.size()), 0);
    }
    return ProbMatrix::checked(std::move(p), 1e-12);
}

}  // namespace

Dataset sample_dataset(const SimConfig& cfg) { return sample_impl(cfg, true); }
Dataset sample_dataset_serial(const SimConfig& cfg) { return sample_impl(cfg, false); }

Vec true_posterior(const SimConfig& cfg, const Eigen::Ref<const Vec>& x) {
    cfg.validate();
    if (x.size() != cfg.dim()) throw std::invalid_argument("true_posterior: dimension mismatch");
    const int k = cfg.class_count();
    std::vector<double> logw(static_cast<std::size_t>(k));
    Vec in = x;  // contiguous copy
    log_mixture_weights(cfg, in.data(), logw.data());
    Vec out(k);
    posterior_from_logw(logw.data(), k, out.data());
    return out;
}

ProbMatrix oracle_matrix(const SimConfig& cfg, const Dataset& ds) {
    return oracle_impl(cfg, ds, true);
}
ProbMatrix oracle_matrix_serial(const SimConfig& cfg, const Dataset& ds) {
    return oracle_impl(cfg, ds, false);
}

}  // namespace probcal::simgen
