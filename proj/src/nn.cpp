#include "gcl/nn.h"

#include <cmath>
#include <sstream>

#include "gcl/errors.h"

namespace gcl {

Mlp::Mlp(ParameterStore& store, const std::string& name, MlpSpec spec, Rng& rng) : spec_(std::move(spec)) {
    if (spec_.widths.size() < 2) throw ConfigError("mlp '" + name + "': needs input and output widths");
    for (std::size_t w : spec_.widths)
        if (w == 0) throw ConfigError("mlp '" + name + "': widths must be positive");
    for (std::size_t l = 0; l + 1 < spec_.widths.size(); ++l) {
        const std::size_t in = spec_.widths[l], out = spec_.widths[l + 1];
        const double bound = 1.0 / std::sqrt(static_cast<double>(in));
        std::uniform_real_distribution<double> u(-bound, bound);
        Matrix w(in, out), b(1, out);
        for (double& x : w.data()) x = u(rng);
        for (double& x : b.data()) x = u(rng);
        std::ostringstream wn, bn;
        wn << name << ".W" << l;
        bn << name << ".b" << l;
        weights_.push_back(&store.create(wn.str(), std::move(w)));
        biases_.push_back(&store.create(bn.str(), std::move(b)));
    }
}

Tensor Mlp::forward(Tape& tape, Tensor x) const {
    if (x.cols() != in_dim()) {
        std::ostringstream os;
        os << "mlp: input width " << x.cols() << ", expected " << in_dim();
        throw ShapeError(os.str());
    }
    Tensor h = x;
    for (std::size_t l = 0; l < weights_.size(); ++l) {
        h = add(matmul(h, tape.param(*weights_[l])), tape.param(*biases_[l]));
        if (l + 1 < weights_.size()) h = tanh(h);
    }
    switch (spec_.output) {
        case OutputActivation::sigmoid:
            return sigmoid(h);
        case OutputActivation::softmax:
            return softmax_rows(h);
        case OutputActivation::none:
            break;
    }
    return h;
}

std::vector<Parameter*> Mlp::parameters() const {
    std::vector<Parameter*> out;
    for (std::size_t l = 0; l < weights_.size(); ++l) {
        out.push_back(weights_[l]);
        out.push_back(biases_[l]);
    }
    return out;
}

void Mlp::zero_output_layer() {
    weights_.back()->value.fill(0.0);
    biases_.back()->value.fill(0.0);
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

}  // namespace gcl
