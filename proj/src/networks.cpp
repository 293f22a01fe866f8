#include "gcl/networks.h"

#include <sstream>

#include "gcl/errors.h"

namespace gcl {

Tensor ModalityBundle::at(Modality m) const {
    if (!h[index(m)]) throw ShapeError(std::string("bundle: modality '") + modality_tag(m) + "' is not active");
    return *h[index(m)];
}

std::size_t ModalityBundle::batch() const {
    for (const auto& t : h)
        if (t) return t->rows();
    return 0;
}

ModalityEncoders::ModalityEncoders(ParameterStore& store, ModalitySet set,
                                   const std::array<std::size_t, kNumModalities>& input_dims, std::size_t hidden,
                                   const std::array<std::size_t, kNumModalities>& latent_dims, Rng& rng)
    : set_(set) {
    for (Modality m : set.members()) {
        const std::size_t i = index(m);
        encoders_[i].emplace(store, std::string("encoder.") + modality_tag(m),
                             MlpSpec{{input_dims[i], hidden, latent_dims[i]}}, rng);
    }
}

Tensor ModalityEncoders::encode(Tape& tape, Tensor x, Modality m) const {
    const auto& enc = encoders_[index(m)];
    if (!enc) throw ShapeError(std::string("encode: modality '") + modality_tag(m) + "' is not active");
    if (x.cols() != enc->in_dim()) {
        std::ostringstream os;
        os << "encode: modality '" << modality_tag(m) << "' input width " << x.cols() << ", configured "
           << enc->in_dim();
        throw ShapeError(os.str());
    }
    return enc->forward(tape, x);
}

ModalityBundle ModalityEncoders::encode_all(Tape& tape, const std::array<Matrix, kNumModalities>& features) const {
    ModalityBundle b;
    std::optional<std::size_t> rows;
    for (Modality m : set_.members()) {
        const Matrix& x = features[index(m)];
        if (rows && x.rows() != *rows) throw ShapeError("encode: modalities disagree on batch size");
        rows = x.rows();
        b.h[index(m)] = encode(tape, tape.constant(x), m);
    }
    return b;
}

LocalHeads::LocalHeads(ParameterStore& store, ModalitySet set,
                       const std::array<std::size_t, kNumModalities>& latent_dims, std::size_t hidden,
                       std::size_t output_dim, Rng& rng) {
    for (Modality m : set.members()) {
        const std::size_t d = latent_dims[index(m)];
        MlpSpec spec = hidden == 0 ? MlpSpec{{d, output_dim}} : MlpSpec{{d, hidden, output_dim}};
        heads_[index(m)].emplace(store, std::string("local_head.") + modality_tag(m), spec, rng);
    }
}

Tensor LocalHeads::predict(Tape& tape, Tensor h, Modality m) const {
    const auto& head = heads_[index(m)];
    if (!head) throw ShapeError(std::string("local head: modality '") + modality_tag(m) + "' is not active");
    if (h.cols() != head->in_dim()) {
        std::ostringstream os;
        os << "local head '" << modality_tag(m) << "': representation width " << h.cols() << ", expected "
           << head->in_dim();
        throw ShapeError(os.str());
    }
    return head->forward(tape, h);
}

}  // namespace gcl
