#pragma once

// Multi-run studies built on train_run: ablations, the Gaussian-noise
// robustness sweep, the message-permutation stress test and grid sweeps.

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "gcl/trainer.h"

namespace gcl {

struct StudyOptions {
    std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
    // Synthetic data only: each seed also re-draws the dataset.
    bool redraw_data = true;
};

// Config for one study seed.
ExperimentConfig seeded_config(const ExperimentConfig& config, std::uint64_t seed, bool redraw_data);

// Mean of every fold model's evaluation.
struct FoldAverage {
    TaskMetrics metrics;
    GovernanceDiagnostics governance;
};
FoldAverage evaluate_folds(const TrainedRun& run, const Dataset& data, const EvalOptions& options);

const std::vector<double>& default_sigmas();

struct NoiseRow {
    double sigma = 0.0;
    TaskMetrics mean;
    TaskMetrics stddev;  // sample std over seeds; missing for one seed
    std::vector<TaskMetrics> per_seed;
};

// Trains once per seed on clean data and evaluates every fold model on the
// test rows with N(0, sigma^2) added to all features.
std::vector<NoiseRow> robustness_sweep(const ExperimentConfig& config, const std::vector<double>& sigmas,
                                       const StudyOptions& options = {});

struct StressRow {
    std::uint64_t seed = 0;
    FoldAverage before;
    FoldAverage after;
    MaybeReal accuracy_drop;  // before - after; accuracy or Acc-2 by task
    bool degenerate = false;  // some batch held a single row
};

struct StressSummary {
    std::vector<StressRow> rows;
    MaybeReal mean_accuracy_drop;
    MaybeReal mean_cka_before;
    MaybeReal mean_cka_after;
};

// Accuracy used for stress drops: classification accuracy, or Acc-2.
MaybeReal stress_accuracy(const TaskMetrics& m);

StressSummary permutation_stress(const ExperimentConfig& config, const StudyOptions& options = {},
                                 bool identity = false);

using GridAxis = std::pair<std::string, std::vector<std::string>>;
// "key = v1, v2, ..." lines; '#' starts a comment. Keys are validated.
std::vector<GridAxis> parse_grid(const std::string& text);
// Cartesian product, first axis varying slowest.
std::vector<std::vector<std::pair<std::string, std::string>>> expand_grid(const std::vector<GridAxis>& axes);

struct SweepRow {
    std::vector<std::pair<std::string, std::string>> assignment;
    RunReport report;
};
std::vector<SweepRow> sensitivity_sweep(const ExperimentConfig& config, const std::vector<GridAxis>& axes);

struct AblationRow {
    Variant variant = Variant::full;
    RunReport report;
};
std::vector<AblationRow> ablate(const ExperimentConfig& config, const std::vector<Variant>& variants);
// "all" or a comma-separated list of variant tags.
std::vector<Variant> parse_variant_list(const std::string& text);

void write_noise_curve(const std::vector<NoiseRow>& rows, const std::filesystem::path& path);
void write_stress(const StressSummary& s, const std::filesystem::path& path);
void write_sweep(const std::vector<SweepRow>& rows, const std::filesystem::path& path);
void write_ablation(const std::vector<AblationRow>& rows, const std::filesystem::path& path);

}  // namespace gcl
