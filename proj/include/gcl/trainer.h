#pragma once

// Training loop with early stopping, k-fold orchestration and evaluation
// (task metrics plus governance diagnostics) of trained models.

#include <array>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gcl/experiment.h"
#include "gcl/metrics.h"

namespace gcl {

struct TaskMetrics {
    MaybeReal mae, corr, acc2, acc7, f1;      // regression
    MaybeReal accuracy, precision, recall;    // classification (f1 shared)

    bool operator==(const TaskMetrics&) const = default;
};

struct GovernanceDiagnostics {
    MaybeReal activation_rate;
    MaybeReal positive_gain_ratio;
    std::map<std::string, MaybeReal> hsic;  // by channel pair, e.g. "l-a"
    std::map<std::string, MaybeReal> cka;
    MaybeReal mean_hsic;
    MaybeReal mean_cka;
    MaybeReal dominance_index;
    MaybeReal alignment_corr;

    bool operator==(const GovernanceDiagnostics&) const = default;
};

struct EvalOptions {
    double theta_ar = 0.1;
    std::size_t batch_size = 128;
    // When set, every route's messages are row-permuted within each batch
    // with a fresh seeded permutation.
    std::optional<std::uint64_t> permutation_seed;
    bool identity_permutation = false;  // permute with the identity (control)
};

struct EvalResult {
    TaskMetrics metrics;
    GovernanceDiagnostics governance;
    double task_loss = 0.0;
    std::vector<double> predictions;  // regression outputs or argmax classes
    Matrix weights;                   // pi, [N x |M|]
    Matrix utilities;                 // marginal utility per modality, [N x |M|]
    std::vector<double> gates;        // alpha over (route, sample)
    std::vector<double> gains;        // teacher Delta over (route, sample)
    std::array<Matrix, kNumModalities> channels;  // z^m rows
    bool permutation_degenerate = false;          // some batch had a single row
};

// Predicted-gain inference over `rows`, with labels used only for metrics and
// diagnostics.
EvalResult evaluate(const GclModel& model, const Dataset& data, std::span<const std::size_t> rows,
                    const EvalOptions& options = {});

// Per-sample increase of the task loss when modality m's proposal is replaced
// by its mean over all rows, pi and c held fixed. [N x |M|].
Matrix marginal_utilities(const GclModel& model, const Matrix& weights, const std::vector<Matrix>& proposals,
                          const std::optional<Matrix>& c, const Targets& targets);

// Mean per-sample task loss of predicted-gain inference over `rows`.
double validation_task_loss(const GclModel& model, const Dataset& data, std::span<const std::size_t> rows,
                            std::size_t batch_size);

// Strict-improvement early stopping on a validation sequence.
class EarlyStopping {
   public:
    explicit EarlyStopping(std::size_t patience) : patience_(patience) {}

    // Records the next epoch's validation loss; true once `patience`
    // consecutive epochs failed to improve on the best.
    bool update(double validation_loss);
    bool improved() const { return improved_; }
    std::size_t best_epoch() const { return best_epoch_; }  // 1-based; 0 before any update
    double best() const { return best_; }
    std::size_t epochs() const { return epochs_; }

   private:
    std::size_t patience_;
    std::size_t epochs_ = 0;
    std::size_t best_epoch_ = 0;
    std::size_t stale_ = 0;
    double best_ = 0.0;
    bool improved_ = false;
};

struct EpochRecord {
    std::size_t epoch = 0;
    double train_loss = 0.0;
    double val_loss = 0.0;

    bool operator==(const EpochRecord&) const = default;
};

struct FoldReport {
    std::size_t fold = 0;
    std::string status = "ok";  // "ok" or "failed"
    std::string error;
    std::size_t best_epoch = 0;
    std::size_t epochs_run = 0;
    double best_val_loss = 0.0;
    double restored_val_loss = 0.0;
    double max_simplex_error = 0.0;  // max |sum pi - 1| over every training step
    double min_weight = 1.0;         // min pi over every training step
    std::vector<EpochRecord> history;
    TaskMetrics test;
    GovernanceDiagnostics governance;

    bool operator==(const FoldReport&) const = default;
};

struct RunReport {
    std::string format = "gcl-run-report/1";
    std::string command = "train";
    std::map<std::string, std::string> config;
    std::string config_hash;
    std::uint64_t seed = 0;
    std::string variant;
    std::map<std::string, std::string> variant_map;
    std::map<std::string, std::string> definitions;
    std::string data_provenance;
    std::vector<FoldReport> folds;
    TaskMetrics mean_metrics;
    GovernanceDiagnostics mean_governance;
    std::string checkpoint;  // relative path of saved parameters, if any
    double wall_clock_seconds = 0.0;
    std::string timestamp;

    bool operator==(const RunReport&) const = default;
};

struct TrainedRun {
    RunReport report;
    ExperimentData data;
    SplitPlan plan;
    ResolvedModel resolved;
    std::vector<std::unique_ptr<GclModel>> models;  // null for failed folds
};

// Formula tags for every diagnostic whose definition is a local choice.
std::map<std::string, std::string> metric_definitions();
std::map<std::string, std::string> variant_mapping();

ModelConfig model_config_for(const ExperimentConfig& config, const Dataset& data);

// Trains one fold from `seed`, restoring the best-validation parameters.
FoldReport train_fold(GclModel& model, const ExperimentConfig& config, const LossWeights& weights,
                      const Dataset& data, const FoldIndices& fold, std::uint64_t seed);

// k-fold training on the non-test rows; every fold is evaluated on the fixed
// test rows and the report carries per-fold and mean results.
TrainedRun train_run(const ExperimentConfig& config);
TrainedRun train_run(const ExperimentConfig& config, ExperimentData data);

TaskMetrics mean_metrics(const std::vector<TaskMetrics>& all);
GovernanceDiagnostics mean_governance(const std::vector<GovernanceDiagnostics>& all);

}  // namespace gcl
