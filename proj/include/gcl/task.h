#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "gcl/tensor.h"

namespace gcl {

enum class TaskKind { regression, classification };

std::string task_name(TaskKind t);
TaskKind task_from_name(const std::string& name);

// Supervision for one batch. Regression targets are a [batch x 1] column;
// classification targets are class ids with a one-hot [batch x C] encoding.
struct Targets {
    TaskKind task = TaskKind::regression;
    std::size_t num_classes = 0;
    std::vector<double> labels;
    Matrix encoded;

    static Targets regression(std::span<const double> y);
    // Throws ConfigError when a label is not an integer in [0, num_classes).
    static Targets classification(std::span<const double> class_ids, std::size_t num_classes);

    std::size_t size() const { return labels.size(); }
    // Width of a prediction for this task: 1 or C.
    std::size_t output_dim() const { return task == TaskKind::regression ? 1 : num_classes; }
};

// Per-sample task loss l_tau as a [batch x 1] column: squared error for
// regression, softmax cross-entropy over logits for classification.
Tensor per_sample_loss(Tensor prediction, const Targets& targets);

// Batch mean of per_sample_loss.
Tensor mean_loss(Tensor prediction, const Targets& targets);

}  // namespace gcl
