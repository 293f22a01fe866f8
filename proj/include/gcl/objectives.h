#pragma once

#include <optional>

#include "gcl/networks.h"

namespace gcl {

struct LossWeights {
    double loc = 0.5;
    double pub = 0.3;
    double gain = 0.1;
    double red = 0.05;
    double gpred = 1.0;  // gain-predictor regression onto the teacher gain
};

// Scalar loss components; `pub` is absent without a public factor.
struct LossTerms {
    Tensor task;
    Tensor loc;
    std::optional<Tensor> pub;
    Tensor gain;
    Tensor red;
    Tensor gpred;
};

struct LossReport {
    double task = 0.0;
    double loc = 0.0;
    double pub = 0.0;
    double gain = 0.0;
    double red = 0.0;
    double gpred = 0.0;
    double total = 0.0;
};

struct Objective {
    Tensor total;
    LossReport report;
};

// Batch mean of l_tau(o-hat, y). Class labels outside [0, C) are rejected
// when the Targets are built.
Tensor task_loss(Tensor prediction, const Targets& targets);

// sum over active modalities of the batch mean of l_tau(q_m(h^m), y).
Tensor local_loss(Tape& tape, const ModalityBundle& bundle, const LocalHeads& heads, ModalitySet set,
                  const Targets& targets);

Tensor public_loss(Tensor public_prediction, const Targets& targets);

// task + sum of lambda_i * term_i; terms whose lambda is zero are not added.
// Throws NonFiniteError naming the first non-finite component.
Objective total_loss(const LossTerms& terms, const LossWeights& weights);

}  // namespace gcl
