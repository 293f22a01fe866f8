#pragma once

#include <cstdint>
#include <vector>

#include "gcl/tensor.h"

namespace gcl {

struct AdamOptions {
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    // Decoupled: w <- w * (1 - lr * weight_decay) before the moment update.
    double weight_decay = 1e-4;
};

// Adam with bias-corrected moments and decoupled weight decay. Moment buffers
// are created lazily to match each parameter's shape.
class Adam {
   public:
    explicit Adam(AdamOptions options = {}) : options_(options) {}

    // Applies one update to every parameter in `params` using its `grad`.
    // Throws NonFiniteError naming the first parameter with a NaN/Inf gradient;
    // no parameter is modified in that case.
    void step(ParameterStore& params);

    std::uint64_t step_count() const { return steps_; }
    const AdamOptions& options() const { return options_; }
    const std::vector<Matrix>& first_moments() const { return m_; }
    const std::vector<Matrix>& second_moments() const { return v_; }

   private:
    AdamOptions options_;
    std::uint64_t steps_ = 0;
    std::vector<Matrix> m_;
    std::vector<Matrix> v_;
};

}  // namespace gcl
