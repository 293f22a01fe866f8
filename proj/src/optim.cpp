#include "gcl/optim.h"

#include <cmath>

#include "gcl/errors.h"

namespace gcl {

void Adam::step(ParameterStore& params) {
    for (const Parameter& p : params) {
        if (!p.grad.all_finite()) throw NonFiniteError("adam: non-finite gradient in parameter '" + p.name + "'");
    }
    if (m_.size() != params.size()) {
        m_.clear();
        v_.clear();
        for (const Parameter& p : params) {
            m_.emplace_back(p.value.rows(), p.value.cols());
            v_.emplace_back(p.value.rows(), p.value.cols());
        }
    }
    ++steps_;
    const auto& o = options_;
    const double t = static_cast<double>(steps_);
    const double c1 = 1.0 - std::pow(o.beta1, t);
    const double c2 = 1.0 - std::pow(o.beta2, t);
    const double shrink = 1.0 - o.learning_rate * o.weight_decay;
    for (std::size_t i = 0; i < params.size(); ++i) {
        Parameter& p = params[i];
        Matrix& m = m_[i];
        Matrix& v = v_[i];
        for (std::size_t k = 0; k < p.value.size(); ++k) {
            const double g = p.grad[k];
            m[k] = o.beta1 * m[k] + (1.0 - o.beta1) * g;
            v[k] = o.beta2 * v[k] + (1.0 - o.beta2) * g * g;
            const double mhat = m[k] / c1;
            const double vhat = v[k] / c2;
            p.value[k] = p.value[k] * shrink - o.learning_rate * mhat / (std::sqrt(vhat) + o.epsilon);
        }
    }
}

}  // namespace gcl
