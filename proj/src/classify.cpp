#include "probcal/classify.hpp"

#include "probcal/parallel.hpp"
#include "probcal/rng.hpp"

namespace probcal::classify {

std::vector<int> bayes_classify(const ProbMatrix& probs) {
    const Mat& p = probs.values();
    std::vector<int> labels(static_cast<std::size_t>(p.rows()));
    par::for_blocks(static_cast<std::size_t>(p.rows()),
                    [&](std::size_t lo, std::size_t hi, std::size_t) {
                        for (std::size_t r = lo; r < hi; ++r) {
                            const auto ri = static_cast<Eigen::Index>(r);
                            int best = 0;
                            for (Eigen::Index c = 1; c < p.cols(); ++c)
                                if (p(ri, c) > p(ri, best)) best = static_cast<int>(c);
                            labels[r] = best;
                        }
                    });
    return labels;
}

namespace {

std::vector<int> stochastic_impl(const ProbMatrix& probs, std::uint64_t seed, bool parallel) {
    const Mat& p = probs.values();
    std::vector<int> labels(static_cast<std::size_t>(p.rows()));
    auto body = [&](std::size_t lo, std::size_t hi, std::size_t) {
        for (std::size_t r = lo; r < hi; ++r) {
            const auto ri = static_cast<Eigen::Index>(r);
            auto gen = rng::row_stream(seed, r);
            const double u = gen.uniform01();
            int cls = static_cast<int>(p.cols()) - 1;
            double c = 0.0;
            for (Eigen::Index i = 0; i < p.cols(); ++i) {
                c += p(ri, i);
                if (u < c) {
                    cls = static_cast<int>(i);
                    break;
                }
            }
            labels[r] = cls;
        }
    };
    if (parallel) {
        par::for_blocks(static_cast<std::size_t>(p.rows()), body);
    } else {
        body(0, static_cast<std::size_t>(p.rows()), 0);
    }
    return labels;
}

}  // namespace

std::vector<int> stochastic_classify(const ProbMatrix& probs, std::uint64_t seed) {
    return stochastic_impl(probs, seed, true);
}

std::vector<int> stochastic_classify_serial(const ProbMatrix& probs, std::uint64_t seed) {
    return stochastic_impl(probs, seed, false);
}

}  // namespace probcal::classify
