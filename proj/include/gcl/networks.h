#pragma once

#include <array>
#include <optional>

#include "gcl/modality.h"
#include "gcl/nn.h"
#include "gcl/task.h"

namespace gcl {

// Encoded representations h^m, [batch x d_m] each; absent modalities unset.
struct ModalityBundle {
    std::array<std::optional<Tensor>, kNumModalities> h;

    Tensor at(Modality m) const;
    std::size_t batch() const;
};

// Two-layer perceptron per modality over pre-extracted features.
class ModalityEncoders {
   public:
    ModalityEncoders() = default;
    ModalityEncoders(ParameterStore& store, ModalitySet set, const std::array<std::size_t, kNumModalities>& input_dims,
                     std::size_t hidden, const std::array<std::size_t, kNumModalities>& latent_dims, Rng& rng);

    // Throws ShapeError when x's width differs from the configured input_dim.
    Tensor encode(Tape& tape, Tensor x, Modality m) const;
    ModalityBundle encode_all(Tape& tape, const std::array<Matrix, kNumModalities>& features) const;

    const Mlp& encoder(Modality m) const { return encoders_[index(m)].value(); }
    Mlp& encoder(Modality m) { return encoders_[index(m)].value(); }
    ModalitySet modalities() const { return set_; }

   private:
    ModalitySet set_;
    std::array<std::optional<Mlp>, kNumModalities> encoders_;
};

// Local task heads q_m from h^m to the task output width.
class LocalHeads {
   public:
    LocalHeads() = default;
    LocalHeads(ParameterStore& store, ModalitySet set, const std::array<std::size_t, kNumModalities>& latent_dims,
               std::size_t hidden, std::size_t output_dim, Rng& rng);

    Tensor predict(Tape& tape, Tensor h, Modality m) const;

    const Mlp& head(Modality m) const { return heads_[index(m)].value(); }
    Mlp& head(Modality m) { return heads_[index(m)].value(); }

   private:
    std::array<std::optional<Mlp>, kNumModalities> heads_;
};

}  // namespace gcl
