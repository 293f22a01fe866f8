#pragma once

// Small models, batches and a finite-difference oracle shared by the unit
// tests and the acceptance runner.

#include <cmath>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "gcl/gradcheck.h"
#include "gcl/model.h"

namespace gcl::testing {

inline Matrix random_matrix(std::size_t r, std::size_t c, std::uint64_t seed) {
    Rng rng(seed);
    std::normal_distribution<double> n(0.0, 1.0);
    Matrix m(r, c);
    for (auto& v : m.data()) v = n(rng);
    return m;
}

// Width-8 nets over small inputs.
inline ModelConfig tiny_config(TaskKind task = TaskKind::regression, std::size_t classes = 0) {
    ModelConfig c;
    c.task = task;
    c.num_classes = classes;
    c.input_dims = {6, 5, 4};
    c.latent_dims = {8, 8, 8};
    c.encoder_hidden = 8;
    c.stage1.message_dim = 3;
    c.stage1.hidden = 8;
    c.stage2.public_dim = 8;
    c.stage2.proposal_dim = 8;
    c.stage2.hidden = 8;
    return c;
}

struct Batch {
    std::array<Matrix, kNumModalities> x;
    Targets y;
};

inline Batch make_batch(const ModelConfig& c, std::size_t b, std::uint64_t seed) {
    Batch out;
    for (std::size_t m = 0; m < kNumModalities; ++m) out.x[m] = random_matrix(b, c.input_dims[m], seed + m);
    std::vector<double> y(b);
    for (std::size_t i = 0; i < b; ++i) {
        y[i] = c.task == TaskKind::regression ? 2.0 * std::sin(static_cast<double>(i + seed))
                                              : static_cast<double>((i + seed) % c.num_classes);
    }
    out.y = c.task == TaskKind::regression ? Targets::regression(y) : Targets::classification(y, c.num_classes);
    return out;
}

// Width-4 regression nets, batch 4, targets of scale 0.01.
inline ModelConfig gradcheck_config() {
    ModelConfig c = tiny_config();
    c.latent_dims = {4, 4, 4};
    c.encoder_hidden = 4;
    c.stage1.hidden = 4;
    c.stage2.public_dim = 4;
    c.stage2.proposal_dim = 4;
    c.stage2.hidden = 4;
    return c;
}

inline Batch gradcheck_batch(const ModelConfig& c, std::uint64_t seed) {
    Batch out = make_batch(c, 4, seed);
    std::vector<double> y(4);
    for (std::size_t i = 0; i < y.size(); ++i) y[i] = 0.01 * std::sin(static_cast<double>(i + seed));
    out.y = Targets::regression(y);
    return out;
}

using TermPick = std::function<Tensor(const LossTerms&)>;

inline const std::map<std::string, TermPick>& loss_terms_by_name() {
    static const std::map<std::string, TermPick> terms{
        {"task", [](const LossTerms& l) { return l.task; }},
        {"loc", [](const LossTerms& l) { return l.loc; }},
        {"pub", [](const LossTerms& l) { return *l.pub; }},
        {"gain", [](const LossTerms& l) { return l.gain; }},
        {"red", [](const LossTerms& l) { return l.red; }},
        {"gpred", [](const LossTerms& l) { return l.gpred; }},
        {"total", [](const LossTerms& l) { return total_loss(l, LossWeights{}).total; }},
    };
    return terms;
}

// Max relative error between backward gradients and central differences of
// the same objective, where every stop-gradient'd quantity (teacher gains in
// the gates and both regularisers, the predictor's inputs) is held at its
// value at the unperturbed parameters.
inline double term_gradient_error(GclModel& model, const Batch& batch, const TermPick& pick, double eps = 1e-5) {
    struct Frozen {
        Route route;
        Matrix gain, h_to, message;
    };
    std::vector<Frozen> frozen;
    {
        Tape t;
        const auto fr = model.forward(t, batch.x, &batch.y);
        for (const auto& rec : fr.stage1.routes) {
            frozen.push_back({rec.route, rec.teacher_gain->value(), fr.bundle.at(rec.route.to).value(),
                              rec.message.value()});
        }
    }
    ForwardOptions held;
    for (const auto& f : frozen) held.gate_gains[f.route] = f.gain;
    const auto oracle = [&](Tape& t) {
        const auto fr = model.forward(t, batch.x, &batch.y, held);
        LossTerms terms = model.loss_terms(t, fr, batch.y);
        Tensor gain = t.constant(Matrix(1, 1, 0.0));
        Tensor gpred = t.constant(Matrix(1, 1, 0.0));
        for (std::size_t k = 0; k < frozen.size(); ++k) {
            const auto& f = frozen[k];
            gain = sub(gain, mean(mul(fr.stage1.routes[k].gate, t.constant(f.gain))));
            const Tensor pred = model.stage1().predict_gain(t, t.constant(f.h_to), t.constant(f.message), f.route);
            gpred = add(gpred, mean(square(sub(pred, t.constant(f.gain)))));
        }
        terms.gain = gain;
        terms.gpred = gpred;
        return pick(terms);
    };
    std::vector<Parameter*> ps;
    for (auto& p : model.parameters()) ps.push_back(&p);
    model.parameters().zero_grad();
    {
        Tape t;
        const auto fr = model.forward(t, batch.x, &batch.y);
        t.backward(pick(model.loss_terms(t, fr, batch.y)));
    }
    std::vector<Matrix> analytic;
    for (auto* p : ps) analytic.push_back(p->grad);
    const auto numeric = finite_difference_gradient(
        [&] {
            Tape t;
            return oracle(t).item();
        },
        ps, eps);
    return max_relative_error(analytic, numeric);
}

}  // namespace gcl::testing
