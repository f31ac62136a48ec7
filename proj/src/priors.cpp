#include "probcal/priors.hpp"

#include <atomic>
#include <cmath>
#include <stdexcept>

#include <Eigen/Eigenvalues>

#include "probcal/parallel.hpp"

namespace probcal::priors {

namespace {
constexpr double kDenomFloor = 1e-300;  // below this a likelihood-ratio denominator is malformed
}

Prior weighted_prior(const Dataset& ds) {
    if (!ds.labels) throw std::invalid_argument("weighted_prior: dataset has no labels");
    if (ds.size() == 0) throw std::invalid_argument("weighted_prior: empty dataset");
    Vec sums = Vec::Zero(ds.class_count);
    double total = 0.0;
    for (Eigen::Index n = 0; n < ds.size(); ++n) {
        const double w = ds.weights ? (*ds.weights)(n) : 1.0;
        sums((*ds.labels)[n]) += w;
        total += w;
    }
    return Prior(sums / total);
}

namespace {

Vec deweight_ratios(const Prior& old_prior, const Prior& new_prior) {
    if (old_prior.size() != new_prior.size())
        throw std::invalid_argument("deweight: prior sizes differ");
    Vec ratio(old_prior.size());
    for (int i = 0; i < old_prior.size(); ++i) {
        if (old_prior[i] == 0.0) {
            if (new_prior[i] > 0.0)
                throw std::invalid_argument(
                    "deweight: zero old prior entry with nonzero new prior");
            ratio(i) = 0.0;
        } else {
            ratio(i) = new_prior[i] / old_prior[i];
        }
    }
    return ratio;
}

ProbMatrix deweight_impl(const ProbMatrix& probs, const Prior& old_prior, const Prior& new_prior,
                         bool parallel) {
    if (probs.class_count() != old_prior.size())
        throw std::invalid_argument("deweight: class count mismatch");
    const Vec ratio = deweight_ratios(old_prior, new_prior);
    const Mat& p = probs.values();
    Mat out(p.rows(), p.cols());
    std::atomic<bool> bad_row{false};
    auto body = [&](std::size_t lo, std::size_t hi, std::size_t) {
        for (std::size_t r = lo; r < hi; ++r) {
            const auto ri = static_cast<Eigen::Index>(r);
            double s = 0.0;
            for (Eigen::Index c = 0; c < p.cols(); ++c) {
                const double q = p(ri, c) * ratio(c);
                out(ri, c) = q;
                s += q;
            }
            if (!(s >= kDenomFloor)) {
                bad_row.store(true, std::memory_order_relaxed);
                continue;
            }
            out.row(ri) /= s;
        }
    };
    if (parallel) {
        par::for_blocks(static_cast<std::size_t>(p.rows()), body);
    } else {
        body(0, static_cast<std::size_t>(p.rows()), 0);
    }
    if (bad_row.load())
        throw std::domain_error("deweight: a row has (near-)zero mass on classes with "
                                "nonzero new prior");
    return ProbMatrix::checked(std::move(out), 1e-9);
}

}  // namespace

ProbMatrix deweight(const ProbMatrix& probs, const Prior& old_prior, const Prior& new_prior) {
    return deweight_impl(probs, old_prior, new_prior, true);
}

ProbMatrix deweight_serial(const ProbMatrix& probs, const Prior& old_prior,
                           const Prior& new_prior) {
    return deweight_impl(probs, old_prior, new_prior, false);
}

namespace {

Vec column_sums(const Mat& p, bool parallel) {
    const auto k = p.cols();
    auto fill = [&](std::size_t lo, std::size_t hi, Vec& acc) {
        for (std::size_t r = lo; r < hi; ++r) acc += p.row(static_cast<Eigen::Index>(r)).transpose();
    };
    if (!parallel) {
        Vec acc = Vec::Zero(k);
        fill(0, static_cast<std::size_t>(p.rows()), acc);
        return acc;
    }
    return par::reduce_blocks<Vec>(
        static_cast<std::size_t>(p.rows()), Vec::Zero(k),
        [&](std::size_t lo, std::size_t hi, Vec& acc) { fill(lo, hi, acc); },
        [](Vec& acc, const Vec& part) { acc += part; });
}

Prior prior_from_column_sums(const Vec& sums) {
    const double total = sums.sum();
    if (!(total > 0.0)) throw std::invalid_argument("estimate_prior: empty or zero matrix");
    return Prior(sums / total);
}

}  // namespace

Prior estimate_prior_from_predictions(const ProbMatrix& probs) {
    if (probs.rows() == 0) throw std::invalid_argument("estimate_prior: empty matrix");
    return prior_from_column_sums(column_sums(probs.values(), true));
}

Prior estimate_prior_from_predictions_serial(const ProbMatrix& probs) {
    if (probs.rows() == 0) throw std::invalid_argument("estimate_prior: empty matrix");
    return prior_from_column_sums(column_sums(probs.values(), false));
}

namespace {

// Likelihood ratios r_mi = probs_mi / model_prior_i. Per-row scale factors
// cancel everywhere they are used (EM step, NLL differences, Hessian).
Mat likelihood_ratios(const ProbMatrix& probs, const Prior& model_prior) {
    if (probs.class_count() != model_prior.size())
        throw std::invalid_argument("pcp: class count mismatch");
    const Mat& p = probs.values();
    Mat r(p.rows(), p.cols());
    for (Eigen::Index c = 0; c < p.cols(); ++c) {
        if (model_prior[c] == 0.0) {
            if (p.col(c).maxCoeff() > 0.0)
                throw std::invalid_argument(
                    "pcp: class with zero model prior has nonzero prediction column");
            r.col(c).setZero();
        } else {
            r.col(c) = p.col(c) / model_prior[c];
        }
    }
    return r;
}

double nll_from_ratios(const Mat& ratios, const Vec& candidate, bool parallel) {
    struct Partial {
        double nll = 0.0;
        bool bad = false;
    };
    auto fill = [&](std::size_t lo, std::size_t hi, Partial& acc) {
        for (std::size_t m = lo; m < hi; ++m) {
            const double s = ratios.row(static_cast<Eigen::Index>(m)).dot(candidate);
            if (!(s >= kDenomFloor)) {
                acc.bad = true;
                return;
            }
            acc.nll -= std::log(s);
        }
    };
    Partial total;
    if (parallel) {
        total = par::reduce_blocks<Partial>(
            static_cast<std::size_t>(ratios.rows()), Partial{},
            [&](std::size_t lo, std::size_t hi, Partial& acc) { fill(lo, hi, acc); },
            [](Partial& acc, const Partial& p) {
                acc.nll += p.nll;
                acc.bad = acc.bad || p.bad;
            });
    } else {
        fill(0, static_cast<std::size_t>(ratios.rows()), total);
    }
    if (total.bad)
        throw std::domain_error("relative_nll: zero or negative argument to the logarithm");
    return total.nll;
}

// One half-EM map application: average of deweighted rows under `candidate`.
Vec em_step(const Mat& ratios, const Vec& candidate) {
    const auto k = ratios.cols();
    struct Partial {
        Vec sums;
        bool bad = false;
    };
    Partial init{Vec::Zero(k), false};
    Partial total = par::reduce_blocks<Partial>(
        static_cast<std::size_t>(ratios.rows()), init,
        [&](std::size_t lo, std::size_t hi, Partial& acc) {
            Vec q(k);
            for (std::size_t m = lo; m < hi; ++m) {
                const auto mi = static_cast<Eigen::Index>(m);
                q = ratios.row(mi).transpose().cwiseProduct(candidate);
                const double s = q.sum();
                if (!(s >= kDenomFloor)) {
                    acc.bad = true;
                    return;
                }
                acc.sums += q / s;
            }
        },
        [](Partial& acc, const Partial& p) {
            acc.sums += p.sums;
            acc.bad = acc.bad || p.bad;
        });
    if (total.bad)
        throw std::domain_error("pcp_solve: a prediction row has (near-)zero likelihood under "
                                "the candidate prior");
    return total.sums / total.sums.sum();
}

double mean_abs_dev(const Vec& a, const Vec& b) {
    return (a - b).cwiseAbs().mean();
}

// Damped Newton step for the unlabeled NLL on the simplex, solved as a
// KKT system with the sum-to-one constraint. Accepted only when the NLL
// strictly decreases and all entries stay positive; otherwise the caller
// falls back to the recursion step.
Vec newton_candidate(const Mat& ratios, const Vec& cur, double cur_nll, bool& accepted) {
    accepted = false;
    const auto k = cur.size();
    Vec grad = Vec::Zero(k);
    Eigen::MatrixXd hess = Eigen::MatrixXd::Zero(k, k);
    for (Eigen::Index m = 0; m < ratios.rows(); ++m) {
        const double s = ratios.row(m).dot(cur);
        if (!(s >= kDenomFloor)) return cur;
        const Vec row = ratios.row(m).transpose() / s;
        grad -= row;
        hess.selfadjointView<Eigen::Lower>().rankUpdate(row, 1.0);
    }
    Eigen::MatrixXd kkt = Eigen::MatrixXd::Zero(k + 1, k + 1);
    kkt.topLeftCorner(k, k) = Eigen::MatrixXd(hess.selfadjointView<Eigen::Lower>());
    kkt.topRightCorner(k, 1).setOnes();
    kkt.bottomLeftCorner(1, k).setOnes();
    Eigen::VectorXd rhs(k + 1);
    rhs.head(k) = -grad;
    rhs(k) = 0.0;
    const Eigen::VectorXd sol = kkt.fullPivLu().solve(rhs);
    if (!sol.allFinite()) return cur;
    const Vec dir = sol.head(k);

    double alpha = 1.0;
    for (int bt = 0; bt < 30; ++bt, alpha *= 0.5) {
        Vec trial = cur + alpha * dir;
        if (trial.minCoeff() <= 0.0) continue;
        trial /= trial.sum();
        double nll;
        try {
            nll = nll_from_ratios(ratios, trial, true);
        } catch (const std::domain_error&) {
            continue;
        }
        if (nll < cur_nll) {
            accepted = true;
            return trial;
        }
    }
    return cur;
}

}  // namespace

double relative_nll(const ProbMatrix& probs, const Prior& model_prior, const Prior& candidate) {
    if (candidate.size() != model_prior.size())
        throw std::invalid_argument("relative_nll: prior sizes differ");
    return nll_from_ratios(likelihood_ratios(probs, model_prior), candidate.values(), true);
}

double relative_nll_serial(const ProbMatrix& probs, const Prior& model_prior,
                           const Prior& candidate) {
    if (candidate.size() != model_prior.size())
        throw std::invalid_argument("relative_nll: prior sizes differ");
    return nll_from_ratios(likelihood_ratios(probs, model_prior), candidate.values(), false);
}

Eigen::MatrixXd pcp_hessian(const ProbMatrix& probs, const Prior& model_prior,
                            const Prior& candidate) {
    if (candidate.size() != model_prior.size())
        throw std::invalid_argument("pcp_hessian: prior sizes differ");
    const Mat ratios = likelihood_ratios(probs, model_prior);
    const auto k = ratios.cols();
    const Vec& c = candidate.values();

    struct Partial {
        Eigen::MatrixXd h;
        bool bad = false;
    };
    Partial init{Eigen::MatrixXd::Zero(k, k), false};
    Partial total = par::reduce_blocks<Partial>(
        static_cast<std::size_t>(ratios.rows()), init,
        [&](std::size_t lo, std::size_t hi, Partial& acc) {
            for (std::size_t m = lo; m < hi; ++m) {
                const auto mi = static_cast<Eigen::Index>(m);
                const double s = ratios.row(mi).dot(c);
                if (!(s >= kDenomFloor)) {
                    acc.bad = true;
                    return;
                }
                const Vec row = ratios.row(mi).transpose() / s;
                acc.h.selfadjointView<Eigen::Lower>().rankUpdate(row, 1.0);
            }
        },
        [](Partial& acc, const Partial& p) {
            acc.h += p.h;
            acc.bad = acc.bad || p.bad;
        });
    if (total.bad) throw std::domain_error("pcp_hessian: zero denominator");
    // mirror the lower triangle so H = H^T exactly
    Eigen::MatrixXd h = total.h.selfadjointView<Eigen::Lower>();
    return h;
}

PcpResult pcp_solve(const ProbMatrix& probs, const Prior& model_prior, const Prior& init,
                    const PcpOptions& opt) {
    if (probs.rows() == 0) throw std::invalid_argument("pcp_solve: empty prediction matrix");
    if (init.size() != model_prior.size())
        throw std::invalid_argument("pcp_solve: prior sizes differ");
    if (!(opt.tol > 0.0)) throw std::invalid_argument("pcp_solve: tol must be > 0");
    const int k = model_prior.size();

    // drop classes with zero model prior (their prediction columns are
    // checked to be identically zero), solve on the rest
    std::vector<int> kept;
    for (int i = 0; i < k; ++i)
        if (model_prior[i] > 0.0) kept.push_back(i);

    Mat ratios_full = likelihood_ratios(probs, model_prior);
    Mat ratios(probs.rows(), static_cast<Eigen::Index>(kept.size()));
    Vec cur(static_cast<Eigen::Index>(kept.size()));
    for (std::size_t j = 0; j < kept.size(); ++j) {
        ratios.col(static_cast<Eigen::Index>(j)) = ratios_full.col(kept[j]);
        cur(static_cast<Eigen::Index>(j)) = init[kept[j]];
    }
    const double init_mass = cur.sum();
    if (!(init_mass > 0.0))
        throw std::invalid_argument("pcp_solve: init has no mass on classes with nonzero prior");
    cur /= init_mass;

    PcpResult result{Prior::uniform(k), 0, false, {}};
    result.nll_trace.push_back(nll_from_ratios(ratios, cur, true));

    for (int it = 0; it < opt.max_iter; ++it) {
        // convergence is always judged against the half-EM map, so the
        // returned prior satisfies the fixed-point residual at tol
        Vec next = em_step(ratios, cur);
        const double delta = mean_abs_dev(next, cur);
        if (delta < opt.tol) {
            result.converged = true;
            break;
        }
        if (opt.newton) {
            bool ok = false;
            const Vec nt = newton_candidate(ratios, cur, result.nll_trace.back(), ok);
            if (ok && nll_from_ratios(ratios, nt, true) < nll_from_ratios(ratios, next, true))
                next = nt;
        }
        cur = next;
        result.nll_trace.push_back(nll_from_ratios(ratios, cur, true));
        result.iterations = it + 1;
    }

    Vec full = Vec::Zero(k);
    for (std::size_t j = 0; j < kept.size(); ++j) full(kept[j]) = cur(static_cast<Eigen::Index>(j));
    result.prior = Prior(full / full.sum());
    return result;
}

}  // namespace probcal::priors
