#include <cstdint>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "probcal/classify.hpp"
#include "probcal/core.hpp"
#include "probcal/harness.hpp"
#include "probcal/io.hpp"
#include "probcal/metrics.hpp"
#include "probcal/mlp.hpp"
#include "probcal/parallel.hpp"
#include "probcal/priors.hpp"
#include "probcal/simgen.hpp"
#include "probcal/types.hpp"

namespace {

using namespace probcal;

std::vector<int> parse_hidden(const std::string& s) {
    std::vector<int> out;
    std::stringstream ss(s);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        if (!tok.empty()) out.push_back(std::stoi(tok));
    }
    return out;
}

int run(int argc, char** argv) {
    CLI::App app{"training-composition bias tools: simulate, train, deweight, solve priors"};
    app.require_subcommand(1);

    // ---- simulate ----
    auto* sim_cmd = app.add_subcommand("simulate", "sample the Gaussian benchmark mixture");
    std::string sim_kind = "representative";
    std::int64_t sim_n = 0;
    std::uint64_t sim_seed = 0;
    std::string sim_out;
    sim_cmd->add_option("--kind", sim_kind, "representative|biased")
        ->check(CLI::IsMember({"representative", "biased"}));
    sim_cmd->add_option("--n", sim_n, "number of points")->required();
    sim_cmd->add_option("--seed", sim_seed, "64-bit seed");
    sim_cmd->add_option("--out", sim_out, "output dataset CSV")->required();

    // ---- train ----
    auto* train_cmd = app.add_subcommand("train", "fit the MLP classifier");
    std::string train_data, train_hidden = "32", train_convention = "interpolation";
    std::string train_weights = "none", train_out, train_manifest;
    mlp::TrainConfig tc;
    train_cmd->add_option("--data", train_data, "training dataset CSV")->required();
    train_cmd->add_option("--hidden", train_hidden, "hidden sizes, e.g. 32 or 128,32");
    train_cmd->add_option("--convention", train_convention, "interpolation|mathematician")
        ->check(CLI::IsMember({"interpolation", "mathematician"}));
    train_cmd->add_option("--lr", tc.learning_rate, "Adam learning rate");
    train_cmd->add_option("--weight-decay", tc.weight_decay, "weight decay lambda");
    train_cmd->add_option("--max-iters", tc.max_iters, "iteration cap");
    train_cmd->add_option("--tol", tc.loss_tol, "stop when a step improves the loss by less");
    train_cmd->add_option("--restarts", tc.restarts, "independent restarts, lowest loss kept");
    train_cmd->add_option("--seed", tc.seed, "64-bit seed");
    train_cmd->add_option("--weights", train_weights, "none|balanced|<csv with weight column>");
    train_cmd->add_option("--manifest", train_manifest, "manifest JSON with class_count");
    train_cmd->add_option("--out", train_out, "output model JSON")->required();

    // ---- predict ----
    auto* pred_cmd = app.add_subcommand("predict", "write class probabilities for a dataset");
    std::string pred_model, pred_data, pred_out;
    pred_cmd->add_option("--model", pred_model, "model JSON")->required();
    pred_cmd->add_option("--data", pred_data, "dataset CSV")->required();
    pred_cmd->add_option("--out", pred_out, "predictions CSV")->required();

    // ---- deweight ----
    auto* dw_cmd = app.add_subcommand("deweight", "replace the prior baked into predictions");
    std::string dw_preds, dw_old, dw_new, dw_out;
    dw_cmd->add_option("--predictions", dw_preds, "predictions CSV")->required();
    dw_cmd->add_option("--old-prior", dw_old, "comma list or JSON array file")->required();
    dw_cmd->add_option("--new-prior", dw_new, "comma list or JSON array file")->required();
    dw_cmd->add_option("--out", dw_out, "output predictions CSV")->required();

    // ---- pcp ----
    auto* pcp_cmd = app.add_subcommand("pcp", "solve for the prediction consistent prior");
    std::string pcp_preds, pcp_model_prior, pcp_init = "uniform", pcp_out;
    priors::PcpOptions popt;
    pcp_cmd->add_option("--predictions", pcp_preds, "predictions CSV")->required();
    pcp_cmd->add_option("--model-prior", pcp_model_prior, "the model's own prior (required)")
        ->required();
    pcp_cmd->add_option("--init", pcp_init, "uniform|model|<comma list>");
    pcp_cmd->add_option("--tol", popt.tol, "mean absolute deviation threshold");
    pcp_cmd->add_option("--max-iter", popt.max_iter, "iteration cap");
    pcp_cmd->add_flag("--newton", popt.newton, "damped-Newton refinement");
    pcp_cmd->add_option("--out", pcp_out, "output JSON (default stdout)");

    // ---- classify ----
    auto* cls_cmd = app.add_subcommand("classify", "assign classes from probabilities");
    std::string cls_preds, cls_rule = "bayes", cls_out;
    std::uint64_t cls_seed = 0;
    cls_cmd->add_option("--predictions", cls_preds, "predictions CSV")->required();
    cls_cmd->add_option("--rule", cls_rule, "bayes|stochastic")
        ->check(CLI::IsMember({"bayes", "stochastic"}));
    cls_cmd->add_option("--seed", cls_seed, "seed for the stochastic rule");
    cls_cmd->add_option("--out", cls_out, "labels CSV")->required();

    // ---- metrics ----
    auto* met_cmd = app.add_subcommand("metrics", "predicted/observed metrics and overshoot");
    std::string met_preds, met_assigned, met_truth, met_true_probs, met_out;
    bool met_printed_var = false;
    met_cmd->add_option("--predictions", met_preds, "predictions CSV")->required();
    met_cmd->add_option("--assigned", met_assigned, "assigned labels CSV")->required();
    met_cmd->add_option("--truth", met_truth, "true labels CSV")->required();
    met_cmd->add_option("--true-probs", met_true_probs, "oracle probabilities CSV (enables KL)");
    met_cmd->add_flag("--printed-var-c", met_printed_var,
                      "use the printed Var(C) denominator (eTP+eFP)^4");
    met_cmd->add_option("--out", met_out, "report JSON (default stdout)");

    // ---- sweep ----
    auto* sweep_cmd = app.add_subcommand("sweep", "variant x size experiment grid");
    std::string sweep_config, sweep_out = "sweep_out", sweep_formats = "csv,json,svg";
    int sweep_jobs = 0;
    sweep_cmd->add_option("--config", sweep_config, "sweep JSON config")->required();
    sweep_cmd->add_option("--out", sweep_out, "output directory");
    sweep_cmd->add_option("--jobs", sweep_jobs, "kernel thread count (0 = default)");
    sweep_cmd->add_option("--formats", sweep_formats, "comma list of csv,json,svg");

    CLI11_PARSE(app, argc, argv);

    if (*sim_cmd) {
        const auto kind = sim_kind == "representative" ? simgen::SimKind::representative
                                                       : simgen::SimKind::biased;
        const auto cfg = simgen::default_spec(kind, sim_n, sim_seed);
        io::save_dataset(simgen::sample_dataset(cfg), sim_out);
        io::Manifest m;
        m.class_count = cfg.class_count();
        m.class_names = {"class0", "class1", "class2"};
        io::save_manifest(m, sim_out + ".manifest.json");
        std::cout << "wrote " << sim_n << " rows to " << sim_out << "\n";
        return 0;
    }

    if (*train_cmd) {
        io::CsvSchema schema;
        if (!train_manifest.empty())
            schema.class_count = io::load_manifest(train_manifest).class_count;
        const Dataset ds = io::load_dataset(train_data, schema);
        tc.hidden_sizes = parse_hidden(train_hidden);
        tc.convention = mlp::convention_from_string(train_convention);

        std::optional<Vec> w;
        if (train_weights == "balanced") {
            w = per_example_weights(ds, balancing_weights(prior_from_labels(ds)));
        } else if (train_weights != "none") {
            const Dataset wds = io::load_dataset(train_weights);
            if (!wds.weights) throw std::runtime_error("weight file has no weight column");
            w = *wds.weights;
        }
        mlp::TrainReport rep;
        const auto model = mlp::train(ds, tc, w ? &*w : nullptr, &rep);
        mlp::save_model(model, train_out, &tc);
        std::cout << "restart " << rep.chosen_restart << " kept, loss "
                  << rep.restart_losses[static_cast<std::size_t>(rep.chosen_restart)] << " after "
                  << rep.restart_iters[static_cast<std::size_t>(rep.chosen_restart)]
                  << " iterations; model written to " << train_out << "\n";
        return 0;
    }

    if (*pred_cmd) {
        const auto model = mlp::load_model(pred_model);
        io::CsvSchema schema;
        schema.class_count = model.class_count;
        const Dataset ds = io::load_dataset(pred_data, schema);
        const auto probs = mlp::predict(model, ds);
        io::save_predictions(probs, pred_out, ds.labels ? &*ds.labels : nullptr);
        std::cout << "wrote " << probs.rows() << " prediction rows to " << pred_out << "\n";
        return 0;
    }

    if (*dw_cmd) {
        const auto preds = io::load_predictions(dw_preds);
        const Prior oldp{io::parse_prior_arg(dw_old)};
        const Prior newp{io::parse_prior_arg(dw_new)};
        const auto out = priors::deweight(preds.probs, oldp, newp);
        io::save_predictions(out, dw_out, preds.labels ? &*preds.labels : nullptr);
        std::cout << "deweighted " << out.rows() << " rows to " << dw_out << "\n";
        return 0;
    }

    if (*pcp_cmd) {
        const auto preds = io::load_predictions(pcp_preds);
        const Prior model_prior{io::parse_prior_arg(pcp_model_prior)};
        Prior init = Prior::uniform(model_prior.size());
        if (pcp_init == "model") {
            init = model_prior;
        } else if (pcp_init != "uniform") {
            init = Prior{io::parse_prior_arg(pcp_init)};
        }
        const auto res = priors::pcp_solve(preds.probs, model_prior, init, popt);

        const auto hess = priors::pcp_hessian(preds.probs, model_prior, res.prior);
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(hess);

        nlohmann::json j;
        j["prior"] = std::vector<double>(res.prior.values().data(),
                                         res.prior.values().data() + res.prior.size());
        j["iterations"] = res.iterations;
        j["converged"] = res.converged;
        j["nll_trace"] = res.nll_trace;
        j["hessian_eigenvalues"] = std::vector<double>(
            eig.eigenvalues().data(), eig.eigenvalues().data() + eig.eigenvalues().size());
        if (pcp_out.empty()) {
            std::cout << j.dump(2) << "\n";
        } else {
            std::ofstream out(pcp_out);
            out << j.dump(2) << "\n";
            std::cout << "wrote " << pcp_out << "\n";
        }
        return 0;
    }

    if (*cls_cmd) {
        const auto preds = io::load_predictions(cls_preds);
        const auto labels = cls_rule == "bayes"
                                ? classify::bayes_classify(preds.probs)
                                : classify::stochastic_classify(preds.probs, cls_seed);
        io::save_labels(labels, cls_out);
        std::cout << "wrote " << labels.size() << " labels to " << cls_out << "\n";
        return 0;
    }

    if (*met_cmd) {
        const auto preds = io::load_predictions(met_preds);
        const auto assigned = io::load_labels(met_assigned);
        const auto truth = io::load_labels(met_truth);
        metrics::PredictedMetricOptions opt;
        opt.printed_var_c = met_printed_var;
        const auto report = metrics::overshoot_report(preds.probs, assigned, truth, opt);
        std::optional<metrics::KlReport> kl;
        if (!met_true_probs.empty()) {
            const auto truep = io::load_predictions(met_true_probs);
            kl = metrics::mean_kl_by_class(truep.probs, preds.probs, truth);
        }
        const std::string text = metrics::report_to_json_string(report, kl ? &*kl : nullptr);
        if (met_out.empty()) {
            std::cout << text << "\n";
        } else {
            std::ofstream out(met_out);
            out << text << "\n";
            std::cout << "wrote " << met_out << "\n";
        }
        return 0;
    }

    if (*sweep_cmd) {
        if (sweep_jobs > 0) par::set_threads(sweep_jobs);
        const auto cfg = harness::SweepConfig::from_json_file(sweep_config);
        const auto result = harness::run_sweep(cfg);
        std::set<std::string> formats;
        std::stringstream ss(sweep_formats);
        std::string tok;
        while (std::getline(ss, tok, ',')) formats.insert(tok);
        harness::emit_report(result, sweep_out, formats);
        std::cout << "wrote " << result.rows.size() << " table rows to " << sweep_out << "\n";
        return 0;
    }

    return 1;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
