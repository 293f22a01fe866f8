#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "gcl/modality.h"
#include "gcl/task.h"

namespace gcl {

struct Dataset {
    TaskKind task = TaskKind::regression;
    std::size_t num_classes = 0;
    std::array<Matrix, kNumModalities> features;  // [N x input_dim_m]
    std::vector<double> labels;                   // value in [-3, 3] or class id
    std::string provenance;

    std::size_t size() const { return labels.size(); }
    std::array<std::size_t, kNumModalities> input_dims() const;
    Targets targets(std::span<const std::size_t> rows) const;
    Targets all_targets() const;
    // Throws FormatError when row counts disagree, values are non-finite or
    // labels fall outside the task's range.
    void validate() const;
};

struct SynthConfig {
    std::size_t n_samples = 2000;
    std::uint64_t seed = 1;
    TaskKind task = TaskKind::regression;
    std::size_t num_classes = 0;
    std::size_t shared_dim = 4;
    std::array<std::size_t, kNumModalities> private_dim{4, 4, 4};
    std::size_t nuisance_dim = 4;
    std::array<std::size_t, kNumModalities> input_dim{16, 16, 16};
    std::array<double, kNumModalities> snr{4.0, 1.0, 1.0};  // dominance knob
    std::array<double, kNumModalities> noise_std{1.0, 1.0, 1.0};
    double coupling_strength = 0.0;  // in [0, 1]
    double label_scale = 1.5;        // std of the unclamped label score
    double shared_share = 0.5;       // fraction of score variance from the shared factor
    std::array<double, kNumModalities> private_label_weight{1.0, 1.0, 1.0};

    // Canonical one-line text of every field; hashed into provenance.
    std::string canonical() const;
    void validate() const;
};

// Latent parts of a generated dataset, for diagnostics and tests.
struct SynthDetail {
    Dataset data;
    // x^m minus its label-bearing part A_m [s; p^m]: coupling nuisance plus noise.
    std::array<Matrix, kNumModalities> residual;
    std::array<Matrix, kNumModalities> nuisance;  // coupling_strength * B_m g
};

// y = clamp(w_s . s + sum_m w_m . p^m, -3, 3) (class-binned for
// classification); x^m = A_m [s; p^m] + coupling * B_m g + eps_m with
// std(eps_m) = noise_std_m / snr_m. With `shifted`, every modality receives
// its own independent draw of g; all other draws are shared with the
// unshifted dataset of the same seed.
Dataset generate_synthetic(const SynthConfig& config, bool shifted = false);
SynthDetail generate_synthetic_detail(const SynthConfig& config, bool shifted = false);

// x^m += N(0, sigma^2) per entry for every modality; labels untouched.
Dataset inject_gaussian_noise(const Dataset& data, double sigma, std::uint64_t seed);

struct FoldIndices {
    std::vector<std::size_t> train;
    std::vector<std::size_t> validation;
};

struct SplitPlan {
    std::vector<std::size_t> test;
    std::vector<FoldIndices> folds;
};

// Carves a fixed test partition (round(test_fraction * n)), then splits the
// remainder into k disjoint validation folds whose sizes differ by at most one.
SplitPlan kfold_split(std::size_t n, std::size_t k, std::uint64_t seed, double test_fraction = 0.2);

// "GCLv1 <N> <dl> <da> <dv> <task> <C-or-0>\n" followed by little-endian
// float64 values: the l, a, v feature blocks row-major, then the labels.
void save_feature_file(const Dataset& data, const std::filesystem::path& path);
Dataset load_feature_file(const std::filesystem::path& path);

std::uint64_t fnv1a64(std::string_view text);
std::string hex64(std::uint64_t v);

}  // namespace gcl
