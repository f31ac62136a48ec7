#include "probcal/metrics.hpp"

#include <cmath>
#include <stdexcept>

#include <json.hpp>

#include "probcal/parallel.hpp"

namespace probcal::metrics {

namespace {

constexpr double kKlClamp = 1e-12;

void check_labels(const std::vector<int>& labels, Eigen::Index n, int k, const char* what) {
    if (static_cast<Eigen::Index>(labels.size()) != n)
        throw std::invalid_argument(std::string(what) + ": length mismatch");
    for (int v : labels)
        if (v < 0 || v >= k) throw std::invalid_argument(std::string(what) + ": label out of range");
}

ExpectedCounts expected_counts_impl(const ProbMatrix& probs, const std::vector<int>& assigned,
                                    bool parallel) {
    const Mat& p = probs.values();
    const int k = probs.class_count();
    check_labels(assigned, p.rows(), k, "expected_counts");

    struct Partial {
        Vec etp, efn, vtp, vfn;
        std::vector<std::int64_t> np;
    };
    Partial init{Vec::Zero(k), Vec::Zero(k), Vec::Zero(k), Vec::Zero(k),
                 std::vector<std::int64_t>(static_cast<std::size_t>(k), 0)};
    auto fill = [&](std::size_t lo, std::size_t hi, Partial& acc) {
        for (std::size_t n = lo; n < hi; ++n) {
            const auto ni = static_cast<Eigen::Index>(n);
            const int a = assigned[n];
            acc.np[static_cast<std::size_t>(a)] += 1;
            for (int i = 0; i < k; ++i) {
                const double pr = p(ni, i);
                const double var = pr * (1.0 - pr);
                if (i == a) {
                    acc.etp(i) += pr;
                    acc.vtp(i) += var;
                } else {
                    acc.efn(i) += pr;
                    acc.vfn(i) += var;
                }
            }
        }
    };
    Partial total = init;
    if (parallel) {
        total = par::reduce_blocks<Partial>(
            static_cast<std::size_t>(p.rows()), init,
            [&](std::size_t lo, std::size_t hi, Partial& acc) { fill(lo, hi, acc); },
            [k](Partial& acc, const Partial& part) {
                acc.etp += part.etp;
                acc.efn += part.efn;
                acc.vtp += part.vtp;
                acc.vfn += part.vfn;
                for (int i = 0; i < k; ++i)
                    acc.np[static_cast<std::size_t>(i)] += part.np[static_cast<std::size_t>(i)];
            });
    } else {
        fill(0, static_cast<std::size_t>(p.rows()), total);
    }

    ExpectedCounts out;
    out.etp = total.etp;
    out.efn = total.efn;
    out.vtp = total.vtp;
    out.vfn = total.vfn;
    out.np = total.np;
    out.total = p.rows();
    out.efp.resize(k);
    out.vfp = total.vtp;  // same P(1-P) sums over the assigned rows
    for (int i = 0; i < k; ++i)
        out.efp(i) = static_cast<double>(out.np[static_cast<std::size_t>(i)]) - out.etp(i);
    return out;
}

}  // namespace

ExpectedCounts expected_counts(const ProbMatrix& probs, const std::vector<int>& assigned) {
    return expected_counts_impl(probs, assigned, true);
}

ExpectedCounts expected_counts_serial(const ProbMatrix& probs, const std::vector<int>& assigned) {
    return expected_counts_impl(probs, assigned, false);
}

std::vector<ClassPredicted> predicted_metrics(const ExpectedCounts& counts,
                                              const PredictedMetricOptions& opt) {
    const int k = static_cast<int>(counts.etp.size());
    std::vector<ClassPredicted> out(static_cast<std::size_t>(k));
    for (int i = 0; i < k; ++i) {
        const double etp = counts.etp(i), efp = counts.efp(i), efn = counts.efn(i);
        const double vtp = counts.vtp(i), vfn = counts.vfn(i);
        const double np = static_cast<double>(counts.np[static_cast<std::size_t>(i)]);
        auto& c = out[static_cast<std::size_t>(i)];

        const double cd = etp + efn;
        if (cd > 0.0) {
            c.completeness.value = etp / cd;
            const double denom = opt.printed_var_c ? (etp + efp) : cd;
            if (denom > 0.0)
                c.completeness.variance =
                    (vtp * efn * efn + vfn * etp * etp) / (denom * denom * denom * denom);
        }
        if (np > 0.0) {
            c.reliability.value = etp / np;
            c.reliability.variance = vtp / (np * np);
            const double fd = np + etp + efn;
            c.f1.value = 2.0 * etp / fd;
            const double t = np + efn;
            c.f1.variance = 4.0 * (vtp * t * t + vfn * etp * etp) / (fd * fd * fd * fd);
        }
    }
    return out;
}

std::vector<ClassObserved> observed_metrics(const std::vector<int>& assigned,
                                            const std::vector<int>& truth, int class_count) {
    if (assigned.size() != truth.size())
        throw std::invalid_argument("observed_metrics: length mismatch");
    check_labels(assigned, static_cast<Eigen::Index>(assigned.size()), class_count,
                 "observed_metrics(assigned)");
    check_labels(truth, static_cast<Eigen::Index>(truth.size()), class_count,
                 "observed_metrics(truth)");
    std::vector<ClassObserved> out(static_cast<std::size_t>(class_count));
    for (std::size_t n = 0; n < truth.size(); ++n) {
        if (assigned[n] == truth[n]) {
            out[static_cast<std::size_t>(truth[n])].tp += 1;
        } else {
            out[static_cast<std::size_t>(assigned[n])].fp += 1;
            out[static_cast<std::size_t>(truth[n])].fn += 1;
        }
    }
    for (auto& c : out) {
        const double tp = static_cast<double>(c.tp);
        if (c.tp + c.fn > 0) c.completeness = tp / static_cast<double>(c.tp + c.fn);
        if (c.tp + c.fp > 0) c.reliability = tp / static_cast<double>(c.tp + c.fp);
        if (2 * c.tp + c.fp + c.fn > 0) c.f1 = 2.0 * tp / static_cast<double>(2 * c.tp + c.fp + c.fn);
    }
    return out;
}

namespace {

OvershootCell make_cell(const MetricValue& pred, const std::optional<double>& obs) {
    OvershootCell cell;
    if (!pred.value || !obs) return cell;
    cell.overshoot = *obs - *pred.value;
    if (pred.variance && *pred.variance > 0.0) {
        cell.z = *cell.overshoot / std::sqrt(*pred.variance);
        cell.inconsistent = std::fabs(*cell.z) > 3.0;
    } else if (*cell.overshoot == 0.0) {
        cell.z = 0.0;
    } else {
        cell.inconsistent = true;  // nonzero overshoot against a zero-variance prediction
    }
    return cell;
}

}  // namespace

MetricReport overshoot_report(const ProbMatrix& probs, const std::vector<int>& assigned,
                              const std::vector<int>& truth, const PredictedMetricOptions& opt) {
    MetricReport rep;
    rep.counts = expected_counts(probs, assigned);
    rep.predicted = predicted_metrics(rep.counts, opt);
    rep.observed = observed_metrics(assigned, truth, probs.class_count());
    rep.overshoot.resize(rep.predicted.size());
    for (std::size_t i = 0; i < rep.predicted.size(); ++i) {
        rep.overshoot[i].completeness =
            make_cell(rep.predicted[i].completeness, rep.observed[i].completeness);
        rep.overshoot[i].reliability =
            make_cell(rep.predicted[i].reliability, rep.observed[i].reliability);
        rep.overshoot[i].f1 = make_cell(rep.predicted[i].f1, rep.observed[i].f1);
        rep.any_inconsistent = rep.any_inconsistent || rep.overshoot[i].completeness.inconsistent ||
                               rep.overshoot[i].reliability.inconsistent ||
                               rep.overshoot[i].f1.inconsistent;
    }
    return rep;
}

namespace {

KlReport mean_kl_impl(const ProbMatrix& true_probs, const ProbMatrix& model_probs,
                      const std::vector<int>& truth, bool parallel) {
    const Mat& pt = true_probs.values();
    const Mat& pm = model_probs.values();
    if (pt.rows() != pm.rows() || pt.cols() != pm.cols())
        throw std::invalid_argument("mean_kl_by_class: shape mismatch");
    const int k = static_cast<int>(pt.cols());
    check_labels(truth, pt.rows(), k, "mean_kl_by_class");

    struct Partial {
        Vec sums;
        std::vector<std::int64_t> counts;
        std::int64_t clamped = 0;
    };
    Partial init{Vec::Zero(k), std::vector<std::int64_t>(static_cast<std::size_t>(k), 0), 0};
    auto fill = [&](std::size_t lo, std::size_t hi, Partial& acc) {
        for (std::size_t n = lo; n < hi; ++n) {
            const auto ni = static_cast<Eigen::Index>(n);
            double d = 0.0;
            bool clamped = false;
            for (int i = 0; i < k; ++i) {
                const double t = pt(ni, i);
                if (t <= 0.0) continue;  // 0 * ln 0 = 0
                double m = pm(ni, i);
                if (m < kKlClamp) {
                    m = kKlClamp;
                    clamped = true;
                }
                d += t * (std::log(t) - std::log(m));
            }
            acc.sums(truth[n]) += d;
            acc.counts[static_cast<std::size_t>(truth[n])] += 1;
            if (clamped) acc.clamped += 1;
        }
    };
    Partial total = init;
    if (parallel) {
        total = par::reduce_blocks<Partial>(
            static_cast<std::size_t>(pt.rows()), init,
            [&](std::size_t lo, std::size_t hi, Partial& acc) { fill(lo, hi, acc); },
            [k](Partial& acc, const Partial& part) {
                acc.sums += part.sums;
                acc.clamped += part.clamped;
                for (int i = 0; i < k; ++i)
                    acc.counts[static_cast<std::size_t>(i)] += part.counts[static_cast<std::size_t>(i)];
            });
    } else {
        fill(0, static_cast<std::size_t>(pt.rows()), total);
    }

    KlReport rep;
    rep.class_counts = total.counts;
    rep.clamped_rows = total.clamped;
    rep.per_class.resize(static_cast<std::size_t>(k));
    for (int i = 0; i < k; ++i) {
        const auto c = total.counts[static_cast<std::size_t>(i)];
        if (c > 0) rep.per_class[static_cast<std::size_t>(i)] = total.sums(i) / static_cast<double>(c);
    }
    rep.overall = pt.rows() > 0 ? total.sums.sum() / static_cast<double>(pt.rows()) : 0.0;
    return rep;
}

nlohmann::json opt_json(const std::optional<double>& v) {
    if (!v) return nullptr;
    return *v;
}

nlohmann::json cell_json(const OvershootCell& c) {
    nlohmann::json j;
    j["overshoot"] = opt_json(c.overshoot);
    j["z"] = opt_json(c.z);
    j["inconsistent"] = c.inconsistent;
    return j;
}

}  // namespace

KlReport mean_kl_by_class(const ProbMatrix& true_probs, const ProbMatrix& model_probs,
                          const std::vector<int>& truth) {
    return mean_kl_impl(true_probs, model_probs, truth, true);
}

KlReport mean_kl_by_class_serial(const ProbMatrix& true_probs, const ProbMatrix& model_probs,
                                 const std::vector<int>& truth) {
    return mean_kl_impl(true_probs, model_probs, truth, false);
}

std::string report_to_json_string(const MetricReport& report, const KlReport* kl) {
    nlohmann::json j;
    const int k = static_cast<int>(report.predicted.size());
    j["class_count"] = k;
    j["total"] = report.counts.total;
    j["any_inconsistent"] = report.any_inconsistent;
    for (int i = 0; i < k; ++i) {
        const auto idx = static_cast<std::size_t>(i);
        nlohmann::json c;
        c["counts"] = {{"etp", report.counts.etp(i)},   {"efp", report.counts.efp(i)},
                       {"efn", report.counts.efn(i)},   {"vtp", report.counts.vtp(i)},
                       {"vfp", report.counts.vfp(i)},   {"vfn", report.counts.vfn(i)},
                       {"np", report.counts.np[idx]}};
        c["predicted"] = {{"completeness", opt_json(report.predicted[idx].completeness.value)},
                          {"completeness_var", opt_json(report.predicted[idx].completeness.variance)},
                          {"reliability", opt_json(report.predicted[idx].reliability.value)},
                          {"reliability_var", opt_json(report.predicted[idx].reliability.variance)},
                          {"f1", opt_json(report.predicted[idx].f1.value)},
                          {"f1_var", opt_json(report.predicted[idx].f1.variance)}};
        c["observed"] = {{"completeness", opt_json(report.observed[idx].completeness)},
                         {"reliability", opt_json(report.observed[idx].reliability)},
                         {"f1", opt_json(report.observed[idx].f1)},
                         {"tp", report.observed[idx].tp},
                         {"fp", report.observed[idx].fp},
                         {"fn", report.observed[idx].fn}};
        c["overshoot"] = {{"completeness", cell_json(report.overshoot[idx].completeness)},
                          {"reliability", cell_json(report.overshoot[idx].reliability)},
                          {"f1", cell_json(report.overshoot[idx].f1)}};
        if (kl) {
            c["mean_kl"] = opt_json(kl->per_class[idx]);
        }
        j["classes"].push_back(c);
    }
    if (kl) {
        j["kl"] = {{"overall", kl->overall}, {"clamped_rows", kl->clamped_rows}};
    }
    return j.dump(2);
}

}  // namespace probcal::metrics
