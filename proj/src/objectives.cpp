#include "gcl/objectives.h"

#include <cmath>

#include "gcl/errors.h"

namespace gcl {

Tensor task_loss(Tensor prediction, const Targets& targets) { return mean_loss(prediction, targets); }

Tensor local_loss(Tape& tape, const ModalityBundle& bundle, const LocalHeads& heads, ModalitySet set,
                  const Targets& targets) {
    std::optional<Tensor> total;
    for (Modality m : set.members()) {
        Tensor term = mean_loss(heads.predict(tape, bundle.at(m), m), targets);
        total = total ? add(*total, term) : term;
    }
    return total ? *total : tape.constant(Matrix(1, 1, 0.0));
}

Tensor public_loss(Tensor public_prediction, const Targets& targets) { return mean_loss(public_prediction, targets); }

Objective total_loss(const LossTerms& terms, const LossWeights& weights) {
    Objective out;
    auto check = [](const char* name, Tensor t) {
        const double v = t.item();
        if (!std::isfinite(v)) throw NonFiniteError(std::string("loss term '") + name + "' is not finite");
        return v;
    };
    out.report.task = check("task", terms.task);
    out.report.loc = check("loc", terms.loc);
    out.report.pub = terms.pub ? check("pub", *terms.pub) : 0.0;
    out.report.gain = check("gain", terms.gain);
    out.report.red = check("red", terms.red);
    out.report.gpred = check("gpred", terms.gpred);

    Tensor total = terms.task;
    auto accumulate = [&total](double lambda, Tensor term) {
        if (lambda != 0.0) total = add(total, scale(term, lambda));
    };
    accumulate(weights.loc, terms.loc);
    if (terms.pub) accumulate(weights.pub, *terms.pub);
    accumulate(weights.gain, terms.gain);
    accumulate(weights.red, terms.red);
    accumulate(weights.gpred, terms.gpred);
    out.total = total;
    out.report.total = check("total", total);
    return out;
}

}  // namespace gcl
