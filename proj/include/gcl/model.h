#pragma once

#include <array>
#include <map>
#include <string>
#include <vector>

#include "gcl/objectives.h"
#include "gcl/stage1.h"
#include "gcl/stage2.h"

namespace gcl {

struct ModelConfig {
    TaskKind task = TaskKind::regression;
    std::size_t num_classes = 0;
    std::array<std::size_t, kNumModalities> input_dims{16, 16, 16};
    std::array<std::size_t, kNumModalities> latent_dims{32, 32, 32};
    std::size_t encoder_hidden = 32;
    std::size_t head_hidden = 0;  // 0: local heads are affine
    Stage1Config stage1;
    Stage2Config stage2;
    GatePolicy gate_policy = GatePolicy::governed;
    ModalitySet modalities = ModalitySet::all();

    std::size_t output_dim() const { return task == TaskKind::regression ? 1 : num_classes; }
};

struct ForwardOptions {
    GainMode mode = GainMode::teacher;
    std::map<Route, double> forced_gates;
    std::map<Route, std::vector<std::size_t>> message_permutations;
    std::map<Route, Matrix> gate_gains;
    // Skip stage 1 entirely: z = h.
    bool bypass_interaction = false;
};

struct ForwardResult {
    ModalityBundle bundle;
    Stage1Output stage1;
    ConsensusState consensus;
};

// Encoders, local heads, both protocol stages and the prediction heads, with
// all parameters in one store.
class GclModel {
   public:
    GclModel(const ModelConfig& config, std::uint64_t seed);
    GclModel(const GclModel&) = delete;
    GclModel& operator=(const GclModel&) = delete;

    ForwardResult forward(Tape& tape, const std::array<Matrix, kNumModalities>& features, const Targets* targets,
                          const ForwardOptions& options = {}) const;

    // All objective components for a teacher-mode forward pass.
    LossTerms loss_terms(Tape& tape, const ForwardResult& fr, const Targets& targets) const;

    const ModelConfig& config() const { return config_; }
    ParameterStore& parameters() { return store_; }
    const ParameterStore& parameters() const { return store_; }
    const ModalityEncoders& encoders() const { return encoders_; }
    ModalityEncoders& encoders() { return encoders_; }
    const LocalHeads& local_heads() const { return heads_; }
    LocalHeads& local_heads() { return heads_; }
    const SelectiveInteraction& stage1() const { return stage1_; }
    SelectiveInteraction& stage1() { return stage1_; }
    const ConsensusFormation& stage2() const { return stage2_; }
    ConsensusFormation& stage2() { return stage2_; }

   private:
    ModelConfig config_;
    ParameterStore store_;
    ModalityEncoders encoders_;
    LocalHeads heads_;
    SelectiveInteraction stage1_;
    ConsensusFormation stage2_;
};

// Model slice of a feature batch.
std::array<Matrix, kNumModalities> select_rows(const std::array<Matrix, kNumModalities>& features,
                                               std::span<const std::size_t> rows);

}  // namespace gcl
