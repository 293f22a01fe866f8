#include "gcl/stage2.h"

#include "gcl/errors.h"

namespace gcl {

ConsensusFormation::ConsensusFormation(ParameterStore& store, const Stage2Config& config, ModalitySet set,
                                       const std::array<std::size_t, kNumModalities>& latent_dims,
                                       std::size_t output_dim, Rng& rng)
    : config_(config), set_(set) {
    if (config.public_dim == 0 || config.proposal_dim == 0) throw ConfigError("stage2 widths must be positive");
    const std::size_t dc = config.public_dim, dr = config.proposal_dim, hid = config.hidden;
    const std::size_t cond = config.use_public ? dc : 0;
    if (config.use_public) {
        for (Modality m : set.members()) {
            projectors_[index(m)].emplace(store, std::string("stage2.projector.") + modality_tag(m),
                                          MlpSpec{{latent_dims[index(m)], dc}}, rng);
        }
        shared_.emplace(store, "stage2.public_mlp", MlpSpec{{dc, hid, dc}}, rng);
    }
    for (Modality m : set.members()) {
        const std::size_t in = latent_dims[index(m)] + cond;
        proposers_[index(m)].emplace(store, std::string("stage2.proposal.") + modality_tag(m),
                                     MlpSpec{{in, hid, dr}}, rng);
        scorers_[index(m)].emplace(store, std::string("stage2.score.") + modality_tag(m), MlpSpec{{in, hid, 1}},
                                   rng);
    }
    head_ = Mlp(store, "stage2.head", MlpSpec{{dr + cond, hid, output_dim}}, rng);
    if (config.use_public) public_head_.emplace(store, "stage2.public_head", MlpSpec{{dc, hid, output_dim}}, rng);
}

Tensor ConsensusFormation::project(Tape& tape, Tensor z, Modality m) const {
    if (!projectors_[index(m)]) throw ShapeError("public factor: no projector for this modality");
    return projectors_[index(m)]->forward(tape, z);
}

Tensor ConsensusFormation::pool_and_lift(Tape& tape, std::span<const Tensor> projected) const {
    if (projected.empty()) throw ShapeError("public factor: nothing to pool");
    if (!shared_) throw ShapeError("public factor agent disabled");
    Tensor acc = projected[0];
    for (std::size_t i = 1; i < projected.size(); ++i) acc = add(acc, projected[i]);
    return shared_->forward(tape, scale(acc, 1.0 / static_cast<double>(projected.size())));
}

Tensor ConsensusFormation::extract_public_factor(Tape& tape,
                                                 const std::array<std::optional<Tensor>, kNumModalities>& z) const {
    std::vector<Tensor> projected;
    for (Modality m : set_.members()) projected.push_back(project(tape, z[index(m)].value(), m));
    return pool_and_lift(tape, projected);
}

std::pair<Tensor, Tensor> ConsensusFormation::propose_and_score(Tape& tape, Tensor z, const std::optional<Tensor>& c,
                                                                Modality m) const {
    Tensor in = c ? concat_cols({z, *c}) : z;
    return {proposers_[index(m)]->forward(tape, in), scorers_[index(m)]->forward(tape, in)};
}

std::pair<Tensor, Tensor> ConsensusFormation::aggregate(Tape& tape, std::span<const Tensor> proposals,
                                                        std::span<const Tensor> scores) const {
    if (proposals.empty() || proposals.size() != scores.size()) {
        throw ShapeError("aggregate: need one score per proposal");
    }
    Tensor weights;
    if (config_.uniform_weights) {
        const double w = 1.0 / static_cast<double>(proposals.size());
        weights = tape.constant(Matrix(proposals.front().rows(), proposals.size(), w));
    } else {
        weights = softmax_rows(concat_cols(scores));
    }
    return {weights, combine_proposals(weights, proposals)};
}

Tensor ConsensusFormation::predict(Tape& tape, Tensor consensus, const std::optional<Tensor>& c) const {
    return head_.forward(tape, c ? concat_cols({consensus, *c}) : consensus);
}

Tensor ConsensusFormation::predict_public(Tape& tape, Tensor c) const {
    if (!public_head_) throw ShapeError("public prediction: public-factor agent disabled");
    return public_head_->forward(tape, c);
}

ConsensusState ConsensusFormation::forward(Tape& tape,
                                           const std::array<std::optional<Tensor>, kNumModalities>& z) const {
    ConsensusState s;
    s.order = set_.members();
    if (config_.use_public) {
        for (Modality m : s.order) s.projected.push_back(project(tape, z[index(m)].value(), m));
        s.c = pool_and_lift(tape, s.projected);
    }
    for (Modality m : s.order) {
        auto [r, score] = propose_and_score(tape, z[index(m)].value(), s.c, m);
        s.proposals.push_back(r);
        s.scores.push_back(score);
    }
    std::tie(s.weights, s.consensus) = aggregate(tape, s.proposals, s.scores);
    s.prediction = predict(tape, s.consensus, s.c);
    if (s.c) s.public_prediction = predict_public(tape, *s.c);
    return s;
}

Tensor combine_proposals(Tensor weights, std::span<const Tensor> proposals) {
    if (weights.cols() != proposals.size()) throw ShapeError("combine: weight columns must match proposal count");
    Tensor acc = mul(slice_cols(weights, 0, 1), proposals[0]);
    for (std::size_t i = 1; i < proposals.size(); ++i) acc = add(acc, mul(slice_cols(weights, i, i + 1), proposals[i]));
    return acc;
}

}  // namespace gcl
