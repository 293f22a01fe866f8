#include "gcl/task.h"

#include <cmath>
#include <sstream>

#include "gcl/errors.h"

namespace gcl {

std::string task_name(TaskKind t) { return t == TaskKind::regression ? "regression" : "classification"; }

TaskKind task_from_name(const std::string& name) {
    if (name == "regression") return TaskKind::regression;
    if (name == "classification") return TaskKind::classification;
    throw ConfigError("unknown task kind '" + name + "'");
}

Targets Targets::regression(std::span<const double> y) {
    Targets t;
    t.task = TaskKind::regression;
    t.labels.assign(y.begin(), y.end());
    t.encoded = Matrix::column(y);
    return t;
}

Targets Targets::classification(std::span<const double> class_ids, std::size_t num_classes) {
    if (num_classes < 2) throw ConfigError("classification needs at least 2 classes");
    Targets t;
    t.task = TaskKind::classification;
    t.num_classes = num_classes;
    t.labels.assign(class_ids.begin(), class_ids.end());
    t.encoded = Matrix(class_ids.size(), num_classes);
    for (std::size_t i = 0; i < class_ids.size(); ++i) {
        const double c = class_ids[i];
        if (!(c >= 0.0) || c >= static_cast<double>(num_classes) || c != std::floor(c)) {
            std::ostringstream os;
            os << "label " << c << " at row " << i << " outside class range [0, " << num_classes << ")";
            throw ConfigError(os.str());
        }
        t.encoded(i, static_cast<std::size_t>(c)) = 1.0;
    }
    return t;
}

Tensor per_sample_loss(Tensor prediction, const Targets& targets) {
    if (prediction.rows() != targets.size() || prediction.cols() != targets.output_dim()) {
        std::ostringstream os;
        os << "task loss: prediction " << shape_string(prediction.value()) << " vs " << targets.size() << " targets of width "
           << targets.output_dim();
        throw ShapeError(os.str());
    }
    Tensor y = prediction.tape().constant(targets.encoded);
    if (targets.task == TaskKind::regression) return square(sub(prediction, y));
    return neg(sum_cols(mul(y, log_softmax_rows(prediction))));
}

Tensor mean_loss(Tensor prediction, const Targets& targets) { return mean(per_sample_loss(prediction, targets)); }

}  // namespace gcl
