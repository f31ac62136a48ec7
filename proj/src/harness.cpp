#include "probcal/harness.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <stdexcept>

#include <json.hpp>

#include "probcal/classify.hpp"
#include "probcal/core.hpp"
#include "probcal/io.hpp"
#include "probcal/metrics.hpp"
#include "probcal/priors.hpp"
#include "probcal/rng.hpp"
#include "probcal/svg.hpp"

namespace probcal::harness {

namespace {

// seed derivation tags, one namespace per purpose
constexpr std::uint64_t kTagTest = 101;
constexpr std::uint64_t kTagRepPool = 201;
constexpr std::uint64_t kTagBiasedPool = 202;
constexpr std::uint64_t kTagShuffle = 203;
constexpr std::uint64_t kTagTrain = 300;
constexpr std::uint64_t kTagClassify = 400;

const std::vector<Variant> kAllVariants{Variant::base, Variant::weighted, Variant::deweighted,
                                        Variant::biased, Variant::debiased};

std::uint64_t job_seed(std::uint64_t seed, std::uint64_t tag, Variant v, std::size_t size_idx,
                       int repeat) {
    const std::uint64_t a = rng::derive_seed(seed, tag + static_cast<std::uint64_t>(v));
    return rng::derive_seed(a, static_cast<std::uint64_t>(size_idx),
                            static_cast<std::uint64_t>(repeat));
}

Dataset prefix_subset(const Dataset& pool, std::int64_t n) {
    if (n > pool.size()) throw std::invalid_argument("subset size exceeds pool size");
    Dataset out;
    out.class_count = pool.class_count;
    out.features = pool.features.topRows(n);
    if (pool.labels)
        out.labels = std::vector<int>(pool.labels->begin(), pool.labels->begin() + n);
    return out;
}

Dataset shuffled_copy(const Dataset& ds, std::uint64_t seed) {
    std::vector<std::size_t> idx(static_cast<std::size_t>(ds.size()));
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    rng::Xoshiro256pp gen(seed);
    for (std::size_t i = idx.size(); i > 1; --i) {
        const std::size_t j = static_cast<std::size_t>(gen.next() % i);
        std::swap(idx[i - 1], idx[j]);
    }
    Dataset out;
    out.class_count = ds.class_count;
    out.features.resize(ds.size(), ds.dim());
    std::vector<int> labels(idx.size());
    for (std::size_t i = 0; i < idx.size(); ++i) {
        out.features.row(static_cast<Eigen::Index>(i)) =
            ds.features.row(static_cast<Eigen::Index>(idx[i]));
        labels[i] = (*ds.labels)[idx[i]];
    }
    out.labels = std::move(labels);
    return out;
}

// Equal-composition subset of an external pool built by down-sampling the
// common classes; reports how many pool rows were passed over per class.
Dataset downsample_balanced(const Dataset& pool, std::int64_t n,
                            std::vector<std::int64_t>* discarded) {
    const int k = pool.class_count;
    std::vector<std::vector<std::size_t>> by_class(static_cast<std::size_t>(k));
    for (std::size_t i = 0; i < pool.labels->size(); ++i)
        by_class[static_cast<std::size_t>((*pool.labels)[i])].push_back(i);

    std::vector<std::size_t> take;
    const std::int64_t per = n / k;
    std::int64_t rem = n - per * k;
    for (int c = 0; c < k; ++c) {
        std::int64_t want = per + (rem > 0 ? 1 : 0);
        if (rem > 0) --rem;
        const auto& list = by_class[static_cast<std::size_t>(c)];
        const std::int64_t got = std::min<std::int64_t>(want, static_cast<std::int64_t>(list.size()));
        for (std::int64_t i = 0; i < got; ++i) take.push_back(list[static_cast<std::size_t>(i)]);
        if (discarded)
            (*discarded)[static_cast<std::size_t>(c)] =
                static_cast<std::int64_t>(list.size()) - got;
    }
    std::sort(take.begin(), take.end());  // keep pool order

    Dataset out;
    out.class_count = k;
    out.features.resize(static_cast<Eigen::Index>(take.size()), pool.dim());
    std::vector<int> labels(take.size());
    for (std::size_t i = 0; i < take.size(); ++i) {
        out.features.row(static_cast<Eigen::Index>(i)) =
            pool.features.row(static_cast<Eigen::Index>(take[i]));
        labels[i] = (*pool.labels)[take[i]];
    }
    out.labels = std::move(labels);
    return out;
}

struct JobOutput {
    metrics::MetricReport report;
    std::optional<metrics::KlReport> kl;
    double train_loss = 0.0;
    int train_iters = 0;
    int chosen_restart = -1;
};

const std::string metric_names[3] = {"overshoot_C", "overshoot_R", "overshoot_F1"};

const metrics::OvershootCell& cell_of(const metrics::ClassOvershoot& c, int m) {
    return m == 0 ? c.completeness : (m == 1 ? c.reliability : c.f1);
}

std::string variant_color(Variant v) {
    switch (v) {
        case Variant::base: return "#333333";
        case Variant::weighted: return "#1f77b4";
        case Variant::deweighted: return "#2ca02c";
        case Variant::biased: return "#d62728";
        case Variant::debiased: return "#9467bd";
    }
    return "#000000";
}

}  // namespace

std::string to_string(Variant v) {
    switch (v) {
        case Variant::base: return "base";
        case Variant::weighted: return "weighted";
        case Variant::deweighted: return "deweighted";
        case Variant::biased: return "biased";
        case Variant::debiased: return "debiased";
    }
    throw std::invalid_argument("bad variant");
}

Variant variant_from_string(const std::string& s) {
    for (Variant v : kAllVariants)
        if (to_string(v) == s) return v;
    throw std::invalid_argument("unknown variant: " + s);
}

void SweepConfig::validate() const {
    if (sizes.empty()) throw std::invalid_argument("SweepConfig: sizes must be non-empty");
    for (std::size_t i = 0; i < sizes.size(); ++i) {
        if (sizes[i] < 1) throw std::invalid_argument("SweepConfig: sizes must be positive");
        if (i > 0 && sizes[i] <= sizes[i - 1])
            throw std::invalid_argument("SweepConfig: sizes must be strictly ascending");
    }
    if (repeats < 1) throw std::invalid_argument("SweepConfig: repeats must be >= 1");
    if (variants.empty()) throw std::invalid_argument("SweepConfig: variants must be non-empty");
    if (test_size < 1 && uses_sim())
        throw std::invalid_argument("SweepConfig: test_size must be positive");
    if (external_train_csv.has_value() != external_test_csv.has_value())
        throw std::invalid_argument("SweepConfig: external train and test come together");
    train.validate();
}

SweepConfig SweepConfig::from_json_string(const std::string& text) {
    const auto j = nlohmann::json::parse(text);
    SweepConfig cfg;
    cfg.sizes = j.at("sizes").get<std::vector<std::int64_t>>();
    cfg.repeats = j.value("repeats", 3);
    if (j.contains("variants")) {
        cfg.variants.clear();
        for (const auto& s : j["variants"]) cfg.variants.push_back(variant_from_string(s));
    }
    cfg.test_size = j.value("test_size", std::int64_t{20000});
    cfg.seed = j.value("seed", std::uint64_t{0});
    if (j.contains("train")) {
        const auto& t = j["train"];
        cfg.train.hidden_sizes = t.value("hidden_sizes", std::vector<int>{32});
        cfg.train.learning_rate = t.value("learning_rate", 2e-3);
        cfg.train.weight_decay = t.value("weight_decay", 1e-4);
        cfg.train.max_iters = t.value("max_iters", 25000);
        cfg.train.loss_tol = t.value("loss_tol", 1e-8);
        cfg.train.restarts = t.value("restarts", 5);
        cfg.train.convention =
            mlp::convention_from_string(t.value("convention", std::string("interpolation")));
    }
    if (j.contains("external_train_csv")) {
        cfg.external_train_csv = j["external_train_csv"].get<std::string>();
        cfg.external_test_csv = j.at("external_test_csv").get<std::string>();
    }
    return cfg;
}

SweepConfig SweepConfig::from_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open sweep config: " + path);
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return from_json_string(text);
}

std::string SweepConfig::to_json_string() const {
    nlohmann::json j;
    j["sizes"] = sizes;
    j["repeats"] = repeats;
    std::vector<std::string> vs;
    for (Variant v : variants) vs.push_back(to_string(v));
    j["variants"] = vs;
    j["test_size"] = test_size;
    j["seed"] = seed;
    j["train"] = {{"hidden_sizes", train.hidden_sizes},
                  {"learning_rate", train.learning_rate},
                  {"weight_decay", train.weight_decay},
                  {"max_iters", train.max_iters},
                  {"loss_tol", train.loss_tol},
                  {"restarts", train.restarts},
                  {"convention", mlp::to_string(train.convention)}};
    if (external_train_csv) {
        j["external_train_csv"] = *external_train_csv;
        j["external_test_csv"] = *external_test_csv;
    }
    return j.dump(2);
}

SweepResult run_sweep(const SweepConfig& cfg) {
    cfg.validate();
    const bool sim = cfg.uses_sim();
    const std::int64_t max_size = cfg.sizes.back();

    // which trainings are actually needed
    auto wants = [&](Variant v) {
        return std::find(cfg.variants.begin(), cfg.variants.end(), v) != cfg.variants.end();
    };
    const bool need_base = wants(Variant::base);
    const bool need_weighted = wants(Variant::weighted) || wants(Variant::deweighted);
    const bool need_biased = wants(Variant::biased) || wants(Variant::debiased);

    // test set (+ analytic oracle when simulating)
    simgen::SimConfig rep_cfg = simgen::default_spec(simgen::SimKind::representative);
    simgen::SimConfig biased_cfg = simgen::default_spec(simgen::SimKind::biased);
    Dataset test;
    std::optional<ProbMatrix> oracle;
    Dataset external_pool;
    if (sim) {
        rep_cfg.n_points = cfg.test_size;
        rep_cfg.seed = rng::derive_seed(cfg.seed, kTagTest);
        test = simgen::sample_dataset(rep_cfg);
        oracle = simgen::oracle_matrix(rep_cfg, test);
    } else {
        external_pool = io::load_dataset(*cfg.external_train_csv);
        test = io::load_dataset(*cfg.external_test_csv);
        if (!external_pool.labels || !test.labels)
            throw std::runtime_error("external sweep data must carry labels");
        if (external_pool.class_count != test.class_count)
            throw std::runtime_error("external train/test class counts differ");
    }
    if (!test.labels) throw std::runtime_error("sweep test set must carry labels");
    const std::vector<int>& truth = *test.labels;
    const int k = test.class_count;

    // per-repeat training pools; subsets are prefixes so curves share draws
    std::vector<Dataset> rep_pools, biased_pools;
    std::vector<std::vector<std::int64_t>> biased_discarded(
        static_cast<std::size_t>(cfg.repeats), std::vector<std::int64_t>(static_cast<std::size_t>(k), 0));
    for (int r = 0; r < cfg.repeats; ++r) {
        if (sim) {
            simgen::SimConfig c = rep_cfg;
            c.n_points = max_size;
            c.seed = rng::derive_seed(cfg.seed, kTagRepPool, static_cast<std::uint64_t>(r));
            rep_pools.push_back(simgen::sample_dataset(c));
            if (need_biased) {
                simgen::SimConfig b = biased_cfg;
                b.n_points = max_size;
                b.seed = rng::derive_seed(cfg.seed, kTagBiasedPool, static_cast<std::uint64_t>(r));
                biased_pools.push_back(simgen::sample_dataset(b));
            }
        } else {
            Dataset pool = shuffled_copy(
                external_pool, rng::derive_seed(cfg.seed, kTagShuffle, static_cast<std::uint64_t>(r)));
            if (max_size > pool.size())
                throw std::runtime_error("sweep size exceeds external pool size");
            if (need_biased)
                biased_pools.push_back(
                    downsample_balanced(pool, max_size, &biased_discarded[static_cast<std::size_t>(r)]));
            rep_pools.push_back(std::move(pool));
        }
    }

    nlohmann::json detail;
    detail["config"] = nlohmann::json::parse(cfg.to_json_string());
    detail["jobs"] = nlohmann::json::array();

    // accumulators keyed by (variant, class, metric, size index)
    struct Acc {
        double value_sum = 0.0, var_sum = 0.0;
        std::vector<double> values;  // for sample variance (kl rows)
        int count = 0;
    };
    std::map<std::tuple<int, int, int, std::size_t>, Acc> over_acc;  // metric 0..2
    std::map<std::tuple<int, int, std::size_t>, Acc> kl_acc;

    for (std::size_t si = 0; si < cfg.sizes.size(); ++si) {
        const std::int64_t size = cfg.sizes[si];
        for (int r = 0; r < cfg.repeats; ++r) {
            auto run_job = [&](Variant v, auto&& fn) {
                try {
                    fn();
                } catch (const std::exception& e) {
                    throw std::runtime_error("sweep job failed (" + to_string(v) + ", size " +
                                             std::to_string(size) + ", repeat " +
                                             std::to_string(r) + "): " + e.what());
                }
            };

            Dataset rep_subset = prefix_subset(rep_pools[static_cast<std::size_t>(r)], size);
            std::optional<Prior> rep_prior;

            std::map<Variant, ProbMatrix> preds;
            std::map<Variant, JobOutput> outputs;

            auto train_variant = [&](Variant v, const Dataset& subset, const Vec* w) {
                mlp::TrainConfig tc = cfg.train;
                tc.seed = job_seed(cfg.seed, kTagTrain, v, si, r);
                mlp::TrainReport trep;
                const mlp::MlpModel model = mlp::train(subset, tc, w, &trep);
                JobOutput out;
                out.train_loss = trep.restart_losses[static_cast<std::size_t>(trep.chosen_restart)];
                out.train_iters = trep.restart_iters[static_cast<std::size_t>(trep.chosen_restart)];
                out.chosen_restart = trep.chosen_restart;
                outputs[v] = std::move(out);
                preds.emplace(v, mlp::predict(model, test));
            };

            if (need_base)
                run_job(Variant::base, [&] { train_variant(Variant::base, rep_subset, nullptr); });
            if (need_weighted) {
                run_job(Variant::weighted, [&] {
                    rep_prior = prior_from_labels(rep_subset);
                    const Vec w = per_example_weights(rep_subset, balancing_weights(*rep_prior));
                    train_variant(Variant::weighted, rep_subset, &w);
                });
                if (wants(Variant::deweighted)) {
                    run_job(Variant::deweighted, [&] {
                        outputs[Variant::deweighted] = JobOutput{};
                        preds.emplace(Variant::deweighted,
                                      priors::deweight(preds.at(Variant::weighted),
                                                       Prior::uniform(k), *rep_prior));
                    });
                }
            }
            if (need_biased) {
                run_job(Variant::biased, [&] {
                    const Dataset biased_subset =
                        prefix_subset(biased_pools[static_cast<std::size_t>(r)], size);
                    train_variant(Variant::biased, biased_subset, nullptr);
                });
                if (wants(Variant::debiased)) {
                    run_job(Variant::debiased, [&] {
                        if (!rep_prior) rep_prior = prior_from_labels(rep_subset);
                        outputs[Variant::debiased] = JobOutput{};
                        preds.emplace(Variant::debiased,
                                      priors::deweight(preds.at(Variant::biased),
                                                       Prior::uniform(k), *rep_prior));
                    });
                }
            }

            for (Variant v : kAllVariants) {
                if (!wants(v)) continue;
                run_job(v, [&] {
                    const ProbMatrix& p = preds.at(v);
                    const auto assigned =
                        classify::stochastic_classify(p, job_seed(cfg.seed, kTagClassify, v, si, r));
                    JobOutput& out = outputs.at(v);
                    out.report = metrics::overshoot_report(p, assigned, truth);
                    if (oracle) out.kl = metrics::mean_kl_by_class(*oracle, p, truth);

                    for (int c = 0; c < k; ++c) {
                        for (int m = 0; m < 3; ++m) {
                            const auto& cell =
                                cell_of(out.report.overshoot[static_cast<std::size_t>(c)], m);
                            if (!cell.overshoot) continue;
                            auto& acc = over_acc[{static_cast<int>(v), c, m, si}];
                            acc.value_sum += *cell.overshoot;
                            const auto& pred =
                                out.report.predicted[static_cast<std::size_t>(c)];
                            const auto& mv =
                                m == 0 ? pred.completeness : (m == 1 ? pred.reliability : pred.f1);
                            if (mv.variance) acc.var_sum += *mv.variance;
                            acc.count += 1;
                        }
                        if (out.kl && out.kl->per_class[static_cast<std::size_t>(c)]) {
                            auto& acc = kl_acc[{static_cast<int>(v), c, si}];
                            const double val = *out.kl->per_class[static_cast<std::size_t>(c)];
                            acc.value_sum += val;
                            acc.values.push_back(val);
                            acc.count += 1;
                        }
                    }

                    nlohmann::json job;
                    job["variant"] = to_string(v);
                    job["size"] = size;
                    job["repeat"] = r;
                    job["train_loss"] = out.train_loss;
                    job["train_iters"] = out.train_iters;
                    job["chosen_restart"] = out.chosen_restart;
                    job["report"] = nlohmann::json::parse(
                        metrics::report_to_json_string(out.report, out.kl ? &*out.kl : nullptr));
                    detail["jobs"].push_back(std::move(job));
                });
            }
        }
    }
    if (!sim) {
        detail["biased_discarded_per_repeat"] = biased_discarded;
    }

    SweepResult result;
    for (Variant v : kAllVariants) {
        if (!wants(v)) continue;
        for (int c = 0; c < k; ++c) {
            for (std::size_t si = 0; si < cfg.sizes.size(); ++si) {
                for (int m = 0; m < 3; ++m) {
                    auto it = over_acc.find({static_cast<int>(v), c, m, si});
                    if (it == over_acc.end() || it->second.count == 0) continue;
                    const auto& acc = it->second;
                    result.rows.push_back(
                        {to_string(v), c, cfg.sizes[si], metric_names[m],
                         acc.value_sum / acc.count,
                         acc.var_sum / (static_cast<double>(acc.count) * acc.count)});
                }
                auto it = kl_acc.find({static_cast<int>(v), c, si});
                if (it != kl_acc.end() && it->second.count > 0) {
                    const auto& acc = it->second;
                    const double mean = acc.value_sum / acc.count;
                    double var = 0.0;
                    if (acc.count > 1) {
                        for (double x : acc.values) var += (x - mean) * (x - mean);
                        var /= static_cast<double>(acc.count - 1) * acc.count;
                    }
                    result.rows.push_back({to_string(v), c, cfg.sizes[si], "kl", mean, var});
                }
            }
        }
    }
    result.summary_json = detail.dump(2);
    return result;
}

void emit_report(const SweepResult& result, const std::string& out_dir,
                 const std::set<std::string>& formats) {
    if (result.rows.empty()) throw std::invalid_argument("emit_report: empty result table");
    if (formats.empty()) throw std::invalid_argument("emit_report: no output formats requested");
    for (const auto& f : formats)
        if (f != "csv" && f != "json" && f != "svg")
            throw std::invalid_argument("emit_report: unknown format '" + f + "'");
    std::filesystem::create_directories(out_dir);
    const std::filesystem::path dir(out_dir);

    if (formats.count("csv")) {
        std::ofstream csv(dir / "sweep.csv");
        if (!csv) throw std::runtime_error("cannot write sweep.csv");
        csv << "variant,class,size,metric,value,variance\n";
        for (const auto& row : result.rows)
            csv << row.variant << ',' << row.class_idx << ',' << row.size << ',' << row.metric
                << ',' << io::format_double(row.value) << ',' << io::format_double(row.variance)
                << "\n";
    }
    if (formats.count("json")) {
        std::ofstream js(dir / "summary.json");
        if (!js) throw std::runtime_error("cannot write summary.json");
        js << result.summary_json << "\n";
    }
    if (formats.count("svg")) {
        int max_class = 0;
        for (const auto& row : result.rows) max_class = std::max(max_class, row.class_idx);
        std::vector<std::string> metric_list;
        for (const auto& m : metric_names) metric_list.push_back(m);
        metric_list.push_back("kl");
        for (const auto& metric : metric_list) {
            std::vector<svg::Panel> panels;
            bool any = false;
            for (int c = 0; c <= max_class; ++c) {
                svg::Panel panel;
                panel.title = "class " + std::to_string(c);
                for (Variant v : kAllVariants) {
                    svg::Series s;
                    s.name = to_string(v);
                    s.color = variant_color(v);
                    for (const auto& row : result.rows) {
                        if (row.metric != metric || row.class_idx != c ||
                            row.variant != to_string(v))
                            continue;
                        s.x.push_back(static_cast<double>(row.size));
                        s.y.push_back(row.value);
                        s.band.push_back(std::sqrt(std::max(0.0, row.variance)));
                    }
                    if (!s.x.empty()) {
                        panel.series.push_back(std::move(s));
                        any = true;
                    }
                }
                panels.push_back(std::move(panel));
            }
            if (!any) continue;
            svg::write_line_plot((dir / (metric + ".svg")).string(), metric + " vs training size",
                                 "training size", metric, panels, true);
        }
    }
}

std::vector<SweepRow> read_rows_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open: " + path);
    std::string line;
    if (!std::getline(in, line) || line != "variant,class,size,metric,value,variance")
        throw std::runtime_error("unexpected sweep.csv header");
    std::vector<SweepRow> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        SweepRow row;
        std::size_t pos = 0;
        auto next = [&]() {
            const auto comma = line.find(',', pos);
            const std::string tok = line.substr(pos, comma - pos);
            pos = comma == std::string::npos ? line.size() : comma + 1;
            return tok;
        };
        row.variant = next();
        row.class_idx = std::stoi(next());
        row.size = std::stoll(next());
        row.metric = next();
        row.value = std::stod(next());
        row.variance = std::stod(next());
        rows.push_back(std::move(row));
    }
    return rows;
}

}  // namespace probcal::harness
