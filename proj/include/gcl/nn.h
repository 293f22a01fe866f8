#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "gcl/tensor.h"

namespace gcl {

using Rng = std::mt19937_64;

enum class OutputActivation { none, sigmoid, softmax };

struct MlpSpec {
    // {in, hidden..., out}; at least input and output widths.
    std::vector<std::size_t> widths;
    OutputActivation output = OutputActivation::none;
};

// Affine layers with tanh between them. Weights are [in x out] and biases
// [1 x out], drawn uniformly from [-1/sqrt(fan_in), 1/sqrt(fan_in)].
class Mlp {
   public:
    Mlp() = default;
    Mlp(ParameterStore& store, const std::string& name, MlpSpec spec, Rng& rng);

    Tensor forward(Tape& tape, Tensor x) const;

    std::size_t in_dim() const { return spec_.widths.front(); }
    std::size_t out_dim() const { return spec_.widths.back(); }
    const MlpSpec& spec() const { return spec_; }
    std::vector<Parameter*> parameters() const;

    // Zeroes the final layer's weight and bias.
    void zero_output_layer();
    Parameter& weight(std::size_t layer) const { return *weights_.at(layer); }
    Parameter& bias(std::size_t layer) const { return *biases_.at(layer); }
    std::size_t layer_count() const { return weights_.size(); }

   private:
    MlpSpec spec_;
    std::vector<Parameter*> weights_;
    std::vector<Parameter*> biases_;
};

// Splits a seed into an independent stream seed (splitmix64 finaliser).
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream);

}  // namespace gcl
