#include "gcl/studies.h"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "gcl/errors.h"
#include "gcl/report.h"

namespace gcl {

namespace {

constexpr std::pair<const char*, MaybeReal TaskMetrics::*> kTaskFields[] = {
    {"mae", &TaskMetrics::mae},           {"corr", &TaskMetrics::corr},
    {"acc2", &TaskMetrics::acc2},         {"acc7", &TaskMetrics::acc7},
    {"f1", &TaskMetrics::f1},             {"accuracy", &TaskMetrics::accuracy},
    {"precision", &TaskMetrics::precision}, {"recall", &TaskMetrics::recall},
};

TaskMetrics stddev_metrics(const std::vector<TaskMetrics>& all) {
    TaskMetrics out;
    for (const auto& [name, f] : kTaskFields) {
        std::vector<double> v;
        for (const auto& m : all) {
            if (m.*f) v.push_back(*(m.*f));
        }
        if (v.size() < 2) continue;
        double mean = 0.0;
        for (double x : v) mean += x;
        mean /= static_cast<double>(v.size());
        double ss = 0.0;
        for (double x : v) ss += (x - mean) * (x - mean);
        out.*f = std::sqrt(ss / static_cast<double>(v.size() - 1));
    }
    return out;
}

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

MaybeReal diff(const MaybeReal& a, const MaybeReal& b) {
    if (!a || !b) return std::nullopt;
    return *a - *b;
}

MaybeReal mean_present(const std::vector<MaybeReal>& v) {
    double s = 0.0;
    std::size_t n = 0;
    for (const auto& x : v) {
        if (x) {
            s += *x;
            ++n;
        }
    }
    if (n == 0) return std::nullopt;
    return s / static_cast<double>(n);
}

}  // namespace

ExperimentConfig seeded_config(const ExperimentConfig& config, std::uint64_t seed, bool redraw_data) {
    ExperimentConfig c = config;
    c.seed = seed;
    if (redraw_data && c.data_source == "synthetic") c.synth.seed = seed;
    return c;
}

FoldAverage evaluate_folds(const TrainedRun& run, const Dataset& data, const EvalOptions& options) {
    std::vector<TaskMetrics> ms;
    std::vector<GovernanceDiagnostics> gs;
    for (std::size_t f = 0; f < run.models.size(); ++f) {
        if (!run.models[f]) continue;
        EvalOptions o = options;
        if (o.permutation_seed) o.permutation_seed = mix_seed(*options.permutation_seed, f);
        const auto ev = evaluate(*run.models[f], data, run.plan.test, o);
        ms.push_back(ev.metrics);
        gs.push_back(ev.governance);
    }
    return {mean_metrics(ms), mean_governance(gs)};
}

const std::vector<double>& default_sigmas() {
    static const std::vector<double> s{0.0, 1.0, 2.0, 5.0, 10.0, 20.0};
    return s;
}

std::vector<NoiseRow> robustness_sweep(const ExperimentConfig& config, const std::vector<double>& sigmas,
                                       const StudyOptions& options) {
    std::vector<NoiseRow> rows(sigmas.size());
    for (std::size_t i = 0; i < sigmas.size(); ++i) rows[i].sigma = sigmas[i];
    for (std::uint64_t seed : options.seeds) {
        const ExperimentConfig c = seeded_config(config, seed, options.redraw_data);
        const TrainedRun run = train_run(c);
        EvalOptions eo;
        eo.theta_ar = c.theta_ar;
        eo.batch_size = c.train.batch_size;
        for (std::size_t i = 0; i < sigmas.size(); ++i) {
            const Dataset noisy = inject_gaussian_noise(run.data.test_view, sigmas[i], mix_seed(seed, 3000 + i));
            rows[i].per_seed.push_back(evaluate_folds(run, noisy, eo).metrics);
        }
    }
    for (auto& r : rows) {
        r.mean = mean_metrics(r.per_seed);
        r.stddev = stddev_metrics(r.per_seed);
    }
    return rows;
}

MaybeReal stress_accuracy(const TaskMetrics& m) { return m.accuracy ? m.accuracy : m.acc2; }

StressSummary permutation_stress(const ExperimentConfig& config, const StudyOptions& options, bool identity) {
    StressSummary s;
    std::vector<MaybeReal> drops, before, after;
    for (std::uint64_t seed : options.seeds) {
        const ExperimentConfig c = seeded_config(config, seed, options.redraw_data);
        const TrainedRun run = train_run(c);
        EvalOptions eo;
        eo.theta_ar = c.theta_ar;
        eo.batch_size = c.train.batch_size;
        StressRow row;
        row.seed = seed;
        row.before = evaluate_folds(run, run.data.test_view, eo);
        eo.permutation_seed = mix_seed(seed, 4000);
        eo.identity_permutation = identity;
        row.after = evaluate_folds(run, run.data.test_view, eo);
        row.degenerate = eo.batch_size < 2 || run.plan.test.size() % eo.batch_size == 1;
        row.accuracy_drop = diff(stress_accuracy(row.before.metrics), stress_accuracy(row.after.metrics));
        drops.push_back(row.accuracy_drop);
        before.push_back(row.before.governance.mean_cka);
        after.push_back(row.after.governance.mean_cka);
        s.rows.push_back(std::move(row));
    }
    s.mean_accuracy_drop = mean_present(drops);
    s.mean_cka_before = mean_present(before);
    s.mean_cka_after = mean_present(after);
    return s;
}

std::vector<GridAxis> parse_grid(const std::string& text) {
    const auto keys = config_keys();
    std::vector<GridAxis> axes;
    std::istringstream in(text);
    std::string line;
    for (std::size_t no = 1; std::getline(in, line); ++no) {
        if (const auto h = line.find('#'); h != std::string::npos) line.erase(h);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw FormatError("grid line " + std::to_string(no) + ": expected key = values");
        const std::string key = trim(line.substr(0, eq));
        if (std::find(keys.begin(), keys.end(), key) == keys.end()) {
            throw ConfigError("grid line " + std::to_string(no) + ": unknown key '" + key + "'");
        }
        auto values = split_list(line.substr(eq + 1));
        if (values.empty()) throw FormatError("grid line " + std::to_string(no) + ": no values");
        axes.emplace_back(key, std::move(values));
    }
    return axes;
}

std::vector<std::vector<std::pair<std::string, std::string>>> expand_grid(const std::vector<GridAxis>& axes) {
    std::vector<std::vector<std::pair<std::string, std::string>>> out{{}};
    for (const auto& [key, values] : axes) {
        std::vector<std::vector<std::pair<std::string, std::string>>> next;
        for (const auto& prefix : out) {
            for (const auto& v : values) {
                auto row = prefix;
                row.emplace_back(key, v);
                next.push_back(std::move(row));
            }
        }
        out = std::move(next);
    }
    return out;
}

std::vector<SweepRow> sensitivity_sweep(const ExperimentConfig& config, const std::vector<GridAxis>& axes) {
    std::vector<SweepRow> rows;
    for (auto& assignment : expand_grid(axes)) {
        ExperimentConfig c = config;
        for (const auto& [k, v] : assignment) c.set(k, v);
        rows.push_back({std::move(assignment), train_run(c).report});
    }
    return rows;
}

std::vector<AblationRow> ablate(const ExperimentConfig& config, const std::vector<Variant>& variants) {
    std::vector<AblationRow> rows;
    for (Variant v : variants) {
        ExperimentConfig c = config;
        c.variant = v;
        rows.push_back({v, train_run(c).report});
    }
    return rows;
}

std::vector<Variant> parse_variant_list(const std::string& text) {
    if (trim(text) == "all") return all_variants();
    std::vector<Variant> out;
    for (const auto& tag : split_list(text)) out.push_back(variant_from_name(tag));
    if (out.empty()) throw ConfigError("empty variant list");
    return out;
}

void write_noise_curve(const std::vector<NoiseRow>& rows, const std::filesystem::path& path) {
    std::string text = "sigma";
    for (const auto& [name, f] : kTaskFields) text += std::string(",") + name + "," + name + "_std";
    text += ",seeds\n";
    for (const auto& r : rows) {
        text += csv_cell(r.sigma);
        for (const auto& [name, f] : kTaskFields) text += "," + csv_cell(r.mean.*f) + "," + csv_cell(r.stddev.*f);
        text += "," + std::to_string(r.per_seed.size()) + "\n";
    }
    write_atomic(path, text);
}

void write_stress(const StressSummary& s, const std::filesystem::path& path) {
    std::string text =
        "seed,degenerate,accuracy_before,accuracy_after,accuracy_drop,mean_cka_before,mean_cka_after,"
        "mean_hsic_before,mean_hsic_after\n";
    for (const auto& r : s.rows) {
        text += std::to_string(r.seed) + "," + (r.degenerate ? "1" : "0") + "," +
                csv_cell(stress_accuracy(r.before.metrics)) + "," + csv_cell(stress_accuracy(r.after.metrics)) + "," +
                csv_cell(r.accuracy_drop) + "," + csv_cell(r.before.governance.mean_cka) + "," +
                csv_cell(r.after.governance.mean_cka) + "," + csv_cell(r.before.governance.mean_hsic) + "," +
                csv_cell(r.after.governance.mean_hsic) + "\n";
    }
    write_atomic(path, text);
}

void write_sweep(const std::vector<SweepRow>& rows, const std::filesystem::path& path) {
    std::string text = std::string("assignment,config_hash,") + kMetricColumns + "\n";
    for (const auto& r : rows) {
        std::string a;
        for (const auto& [k, v] : r.assignment) a += (a.empty() ? "" : ";") + k + "=" + v;
        text += a + "," + r.report.config_hash + "," + metric_cells(r.report.mean_metrics, r.report.mean_governance) +
                "\n";
    }
    write_atomic(path, text);
}

void write_ablation(const std::vector<AblationRow>& rows, const std::filesystem::path& path) {
    std::string text = std::string("variant,source,") + kMetricColumns + "\n";
    for (const auto& r : rows) {
        text += variant_name(r.variant) + ",\"" + variant_source(r.variant) + "\"," +
                metric_cells(r.report.mean_metrics, r.report.mean_governance) + "\n";
    }
    write_atomic(path, text);
}

}  // namespace gcl
