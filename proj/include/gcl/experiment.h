#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "gcl/data.h"
#include "gcl/model.h"
#include "gcl/optim.h"

namespace gcl {

enum class Variant {
    full,
    no_routing,
    no_audit,
    full_exchange,
    uniform_routing,
    no_red,
    no_public,
    uniform_agg,
    task_only,
    unimodal_l,
    unimodal_a,
    unimodal_v,
    drop_l,
    drop_a,
    drop_v,
};

const std::vector<Variant>& all_variants();
std::string variant_name(Variant v);
// Throws ConfigError for names outside the closed set.
Variant variant_from_name(const std::string& name);
// Ablation row or analysis label the tag realises.
std::string variant_source(Variant v);

struct TrainOptions {
    std::size_t batch_size = 128;
    std::size_t patience = 6;
    std::size_t max_epochs = 200;
    std::size_t folds = 5;
    double test_fraction = 0.2;
};

struct ExperimentConfig {
    std::string data_source = "synthetic";  // "synthetic" or "file"
    std::filesystem::path data_path;
    SynthConfig synth;
    // Re-draw the coupling nuisance independently per modality for test rows.
    bool shift = false;

    ModelConfig model;  // task, classes and input dims come from the dataset
    LossWeights weights;
    AdamOptions optim;
    TrainOptions train;
    double theta_ar = 0.1;

    std::uint64_t seed = 1;
    Variant variant = Variant::full;

    // Flat "key = value" view of every field, defaults included, sorted by key.
    std::map<std::string, std::string> resolved() const;
    std::string canonical() const;
    std::string hash() const;
    // Throws ConfigError for unknown keys or unparsable values.
    void set(const std::string& key, const std::string& value);
};

// Parses "key = value" lines; '#' starts a comment. Unknown keys are rejected.
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::filesystem::path& path);
std::vector<std::string> config_keys();

// Model configuration and loss weights after applying a variant.
struct ResolvedModel {
    ModelConfig model;
    LossWeights weights;
};

ResolvedModel apply_variant(const ModelConfig& model, const LossWeights& weights, Variant v);

// Dataset named by the config, plus the copy used for test rows (the shifted
// draw when `shift` is set for synthetic data, otherwise the same data).
struct ExperimentData {
    Dataset data;
    Dataset test_view;
};

ExperimentData load_experiment_data(const ExperimentConfig& config);

}  // namespace gcl
