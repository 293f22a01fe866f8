#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "gcl/errors.h"
#include "gcl/report.h"
#include "gcl/studies.h"

namespace fs = std::filesystem;
using namespace gcl;

namespace {

std::vector<std::uint64_t> parse_seeds(const std::string& text) {
    std::vector<std::uint64_t> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (!item.empty()) out.push_back(std::stoull(item));
    }
    if (out.empty()) throw ConfigError("empty seed list");
    return out;
}

std::vector<double> parse_sigmas(const std::string& text) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (!item.empty()) out.push_back(std::stod(item));
    }
    if (out.empty()) throw ConfigError("empty sigma list");
    return out;
}

std::string show(const MaybeReal& v) { return v ? csv_cell(*v) : "NA"; }

void print_summary(const RunReport& r) {
    std::size_t ok = 0;
    for (const auto& f : r.folds) ok += f.status == "ok";
    std::cout << "variant " << r.variant << "  seed " << r.seed << "  folds ok " << ok << "/" << r.folds.size()
              << "  config " << r.config_hash << "\n";
    const auto& m = r.mean_metrics;
    const auto& g = r.mean_governance;
    if (m.mae) {
        std::cout << "  MAE " << show(m.mae) << "  corr " << show(m.corr) << "  Acc-2 " << show(m.acc2) << "  Acc-7 "
                  << show(m.acc7) << "  F1 " << show(m.f1) << "\n";
    } else {
        std::cout << "  accuracy " << show(m.accuracy) << "  precision " << show(m.precision) << "  recall "
                  << show(m.recall) << "  F1 " << show(m.f1) << "\n";
    }
    std::cout << "  AR " << show(g.activation_rate) << "  PGR " << show(g.positive_gain_ratio) << "  D "
              << show(g.dominance_index) << "  align " << show(g.alignment_corr) << "  CKA " << show(g.mean_cka)
              << "\n";
}

ExperimentConfig config_from_map(const std::map<std::string, std::string>& kv) {
    ExperimentConfig c;
    for (const auto& [k, v] : kv) c.set(k, v);
    return c;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Governed collaborative learning over language, acoustic and visual features"};
    app.require_subcommand(1);

    std::string config_path, variant, out_dir = "gcl-out", report_path, data_path, variants = "all";
    std::string sigmas = "0,1,2,5,10,20", seeds = "1,2,3,4,5", grid_path, synth_path, out_file;
    std::uint64_t seed = 0;
    bool identity = false;

    auto* train = app.add_subcommand("train", "Train with k-fold cross-validation and write a report");
    train->add_option("--config", config_path, "config file")->required();
    train->add_option("--variant", variant, "variant tag");
    train->add_option("--seed", seed, "experiment seed");
    train->add_option("--out", out_dir, "output directory");

    auto* eval = app.add_subcommand("eval", "Evaluate a trained report's checkpoint on a feature file");
    eval->add_option("--report", report_path, "report.json")->required();
    eval->add_option("--data", data_path, "feature file")->required();

    auto* abl = app.add_subcommand("ablate", "Train every listed variant");
    abl->add_option("--config", config_path)->required();
    abl->add_option("--variants", variants, "all or comma-separated tags");
    abl->add_option("--out", out_dir);

    auto* rob = app.add_subcommand("robustness", "Gaussian-noise robustness sweep");
    rob->add_option("--config", config_path)->required();
    rob->add_option("--sigmas", sigmas);
    rob->add_option("--seeds", seeds);
    rob->add_option("--out", out_dir);

    auto* stress = app.add_subcommand("stress", "Message-permutation stress test");
    stress->add_option("--config", config_path)->required();
    stress->add_option("--seeds", seeds);
    stress->add_flag("--identity", identity, "permute with the identity (control run)");
    stress->add_option("--out", out_dir);

    auto* sweep = app.add_subcommand("sweep", "Hyperparameter grid sweep");
    sweep->add_option("--config", config_path)->required();
    sweep->add_option("--grid", grid_path)->required();
    sweep->add_option("--out", out_dir);

    auto* gen = app.add_subcommand("gen-data", "Write a synthetic feature file");
    gen->add_option("--synth-config", synth_path)->required();
    gen->add_option("--out", out_file)->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (train->parsed()) {
            ExperimentConfig c = load_config(config_path);
            if (!variant.empty()) c.variant = variant_from_name(variant);
            if (train->count("--seed")) c.seed = seed;
            TrainedRun run = train_run(c);
            fs::create_directories(out_dir);
            save_checkpoint(run, fs::path(out_dir) / "checkpoint.json");
            run.report.checkpoint = "checkpoint.json";
            emit_report(run.report, out_dir);
            print_summary(run.report);
            std::cout << "report written to " << (fs::path(out_dir) / "report.json").string() << "\n";
        } else if (eval->parsed()) {
            const RunReport rep = load_report(report_path);
            if (rep.checkpoint.empty()) throw FormatError("report has no checkpoint");
            const auto params = load_checkpoint(fs::path(report_path).parent_path() / rep.checkpoint);
            const ExperimentConfig c = config_from_map(rep.config);
            const Dataset data = load_feature_file(data_path);
            const auto resolved = apply_variant(model_config_for(c, data), c.weights, c.variant);
            std::vector<std::size_t> rows(data.size());
            for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = i;
            EvalOptions eo;
            eo.theta_ar = c.theta_ar;
            eo.batch_size = c.train.batch_size;
            std::vector<TaskMetrics> ms;
            std::vector<GovernanceDiagnostics> gs;
            Json folds = Json::array();
            for (std::size_t f = 0; f < params.size(); ++f) {
                if (params[f].empty()) continue;
                GclModel model(resolved.model, mix_seed(c.seed, 1000 + f));
                model.parameters().restore(params[f]);
                const auto ev = evaluate(model, data, rows, eo);
                ms.push_back(ev.metrics);
                gs.push_back(ev.governance);
                folds.push_back(Json{{"fold", f}, {"metrics", metrics_to_json(ev.metrics)},
                                     {"governance", governance_to_json(ev.governance)}});
            }
            const Json out{{"report", report_path},
                           {"data", data_path},
                           {"data_provenance", data.provenance},
                           {"folds", folds},
                           {"mean_metrics", metrics_to_json(mean_metrics(ms))},
                           {"mean_governance", governance_to_json(mean_governance(gs))}};
            std::cout << out.dump(2) << "\n";
        } else if (abl->parsed()) {
            const auto rows = ablate(load_config(config_path), parse_variant_list(variants));
            fs::create_directories(out_dir);
            for (const auto& r : rows) {
                emit_report(r.report, fs::path(out_dir) / variant_name(r.variant));
                print_summary(r.report);
            }
            write_ablation(rows, fs::path(out_dir) / "ablation.csv");
        } else if (rob->parsed()) {
            StudyOptions so;
            so.seeds = parse_seeds(seeds);
            const auto rows = robustness_sweep(load_config(config_path), parse_sigmas(sigmas), so);
            fs::create_directories(out_dir);
            write_noise_curve(rows, fs::path(out_dir) / "noise_curve.csv");
            for (const auto& r : rows) {
                std::cout << "sigma " << r.sigma << "  MAE " << show(r.mean.mae) << " (std " << show(r.stddev.mae)
                          << ")  accuracy " << show(r.mean.accuracy) << "\n";
            }
        } else if (stress->parsed()) {
            StudyOptions so;
            so.seeds = parse_seeds(seeds);
            const auto s = permutation_stress(load_config(config_path), so, identity);
            fs::create_directories(out_dir);
            write_stress(s, fs::path(out_dir) / "stress.csv");
            for (const auto& r : s.rows) {
                if (r.degenerate) std::cout << "seed " << r.seed << ": a batch of one row, permutation is identity\n";
            }
            std::cout << "mean accuracy drop " << show(s.mean_accuracy_drop) << "  mean CKA before "
                      << show(s.mean_cka_before) << "  after " << show(s.mean_cka_after) << "\n";
        } else if (sweep->parsed()) {
            std::ifstream in(grid_path);
            if (!in) throw IoError("cannot open " + grid_path);
            std::stringstream text;
            text << in.rdbuf();
            const auto rows = sensitivity_sweep(load_config(config_path), parse_grid(text.str()));
            fs::create_directories(out_dir);
            write_sweep(rows, fs::path(out_dir) / "sweep.csv");
            for (const auto& r : rows) print_summary(r.report);
        } else if (gen->parsed()) {
            const ExperimentConfig c = load_config(synth_path);
            const Dataset d = generate_synthetic(c.synth, c.shift);
            save_feature_file(d, out_file);
            std::cout << "wrote " << d.size() << " samples to " << out_file << " (" << d.provenance << ")\n";
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
