#pragma once

// Consensus formation: a public-factor agent pooling the specialised channels
// into a shared factor c, and an aggregation agent turning per-modality
// proposals and relevance scores into a convex consensus r and prediction.

#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "gcl/networks.h"

namespace gcl {

struct Stage2Config {
    std::size_t public_dim = 32;    // d_c
    std::size_t proposal_dim = 32;  // d_r
    std::size_t hidden = 16;
    bool use_public = true;         // false: w/o public-factor agent
    bool uniform_weights = false;   // true: pi fixed to 1/|M|
};

struct ConsensusState {
    std::vector<Modality> order;         // modality of each entry below
    std::vector<Tensor> projected;       // per modality, [B x d_c]; empty without public factor
    std::optional<Tensor> c;             // [B x d_c]
    std::vector<Tensor> proposals;       // r^m, [B x d_r]
    std::vector<Tensor> scores;          // s^m, [B x 1]
    Tensor weights;                      // pi, [B x |M|], columns in `order`
    Tensor consensus;                    // r, [B x d_r]
    Tensor prediction;                   // o-hat
    std::optional<Tensor> public_prediction;  // o-hat_c
};

class ConsensusFormation {
   public:
    ConsensusFormation() = default;
    ConsensusFormation(ParameterStore& store, const Stage2Config& config, ModalitySet set,
                       const std::array<std::size_t, kNumModalities>& latent_dims, std::size_t output_dim, Rng& rng);

    Tensor project(Tape& tape, Tensor z, Modality m) const;
    // Mean over the projected vectors followed by the shared perceptron; the
    // result does not depend on the order of `projected`.
    Tensor pool_and_lift(Tape& tape, std::span<const Tensor> projected) const;
    Tensor extract_public_factor(Tape& tape, const std::array<std::optional<Tensor>, kNumModalities>& z) const;

    // (r^m, s^m) from concat(z^m, c), or from z^m alone without public factor.
    std::pair<Tensor, Tensor> propose_and_score(Tape& tape, Tensor z, const std::optional<Tensor>& c,
                                                Modality m) const;

    // pi = softmax over modalities (or uniform), r = sum pi^m r^m.
    std::pair<Tensor, Tensor> aggregate(Tape& tape, std::span<const Tensor> proposals,
                                        std::span<const Tensor> scores) const;

    // g^tau(concat(r, c)), or g^tau(r) without public factor.
    Tensor predict(Tape& tape, Tensor consensus, const std::optional<Tensor>& c) const;
    Tensor predict_public(Tape& tape, Tensor c) const;

    ConsensusState forward(Tape& tape, const std::array<std::optional<Tensor>, kNumModalities>& z) const;

    const Stage2Config& config() const { return config_; }
    const Mlp& projector(Modality m) const { return projectors_[index(m)].value(); }
    const Mlp& proposer(Modality m) const { return proposers_[index(m)].value(); }
    const Mlp& scorer(Modality m) const { return scorers_[index(m)].value(); }
    Mlp& scorer(Modality m) { return scorers_[index(m)].value(); }
    const Mlp& shared() const { return shared_.value(); }
    const Mlp& head() const { return head_; }
    const std::optional<Mlp>& public_head() const { return public_head_; }
    std::optional<Mlp>& public_head() { return public_head_; }

   private:
    Stage2Config config_;
    ModalitySet set_;
    std::array<std::optional<Mlp>, kNumModalities> projectors_;
    std::optional<Mlp> shared_;
    std::array<std::optional<Mlp>, kNumModalities> proposers_;
    std::array<std::optional<Mlp>, kNumModalities> scorers_;
    Mlp head_;
    std::optional<Mlp> public_head_;
};

// sum_m weights[:, m] * proposals[m].
Tensor combine_proposals(Tensor weights, std::span<const Tensor> proposals);

}  // namespace gcl
