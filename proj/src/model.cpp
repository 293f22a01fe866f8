#include "gcl/model.h"

#include "gcl/errors.h"

namespace gcl {

GclModel::GclModel(const ModelConfig& config, std::uint64_t seed) : config_(config) {
    if (config.task == TaskKind::classification && config.num_classes < 2) {
        throw ConfigError("classification model needs at least 2 classes");
    }
    for (Modality m : config.modalities.members()) {
        if (config.latent_dims[index(m)] != config.latent_dims[index(config.modalities.members().front())]) {
            throw ConfigError("latent dims must be equal across active modalities (cosine redundancy score)");
        }
    }
    Rng enc_rng(mix_seed(seed, 1)), head_rng(mix_seed(seed, 2)), s1_rng(mix_seed(seed, 3)), s2_rng(mix_seed(seed, 4));
    encoders_ = ModalityEncoders(store_, config.modalities, config.input_dims, config.encoder_hidden,
                                 config.latent_dims, enc_rng);
    heads_ = LocalHeads(store_, config.modalities, config.latent_dims, config.head_hidden, config.output_dim(),
                        head_rng);
    stage1_ = SelectiveInteraction(store_, config.stage1, config.modalities, config.latent_dims, s1_rng);
    stage2_ = ConsensusFormation(store_, config.stage2, config.modalities, config.latent_dims, config.output_dim(),
                                 s2_rng);
}

ForwardResult GclModel::forward(Tape& tape, const std::array<Matrix, kNumModalities>& features,
                                const Targets* targets, const ForwardOptions& options) const {
    ForwardResult fr;
    fr.bundle = encoders_.encode_all(tape, features);
    if (options.bypass_interaction) {
        fr.stage1.z = fr.bundle.h;
    } else {
        Stage1Options s1;
        s1.mode = options.mode;
        s1.policy = config_.gate_policy;
        s1.forced_gates = options.forced_gates;
        s1.message_permutations = options.message_permutations;
        s1.gate_gains = options.gate_gains;
        fr.stage1 = stage1_.forward(tape, fr.bundle, heads_, targets, s1);
    }
    fr.consensus = stage2_.forward(tape, fr.stage1.z);
    return fr;
}

LossTerms GclModel::loss_terms(Tape& tape, const ForwardResult& fr, const Targets& targets) const {
    LossTerms t;
    t.task = task_loss(fr.consensus.prediction, targets);
    t.loc = local_loss(tape, fr.bundle, heads_, config_.modalities, targets);
    if (fr.consensus.public_prediction) t.pub = public_loss(*fr.consensus.public_prediction, targets);
    t.gain = gain_alignment_loss(tape, fr.stage1.routes);
    std::vector<Tensor> channels;
    for (Modality m : config_.modalities.members()) channels.push_back(fr.stage1.channel(m));
    t.red = redundancy_loss(tape, channels, config_.stage1.tau_red);
    t.gpred = gain_predictor_loss(tape, fr.stage1.routes);
    return t;
}

std::array<Matrix, kNumModalities> select_rows(const std::array<Matrix, kNumModalities>& features,
                                               std::span<const std::size_t> rows) {
    std::array<Matrix, kNumModalities> out;
    for (std::size_t m = 0; m < kNumModalities; ++m) {
        if (features[m].size() > 0 || features[m].cols() > 0) out[m] = features[m].rows_at(rows);
    }
    return out;
}

}  // namespace gcl
