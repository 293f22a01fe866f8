#include "gcl/gradcheck.h"

#include <algorithm>
#include <cmath>

#include "gcl/errors.h"

namespace gcl {

std::vector<Matrix> finite_difference_gradient(const std::function<double()>& f,
                                               std::vector<Parameter*> params, double eps) {
    std::vector<Matrix> out;
    out.reserve(params.size());
    for (Parameter* p : params) {
        Matrix g(p->value.rows(), p->value.cols());
        for (std::size_t k = 0; k < p->value.size(); ++k) {
            const double w = p->value[k];
            p->value[k] = w + eps;
            const double up = f();
            p->value[k] = w - eps;
            const double down = f();
            p->value[k] = w;
            g[k] = (up - down) / (2.0 * eps);
        }
        out.push_back(std::move(g));
    }
    return out;
}

double max_relative_error(const std::vector<Matrix>& a, const std::vector<Matrix>& b, double floor) {
    if (a.size() != b.size()) throw ShapeError("max_relative_error: array count mismatch");
    double worst = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (a[i].shape() != b[i].shape()) throw ShapeError("max_relative_error: shape mismatch");
        for (std::size_t k = 0; k < a[i].size(); ++k) {
            const double x = a[i][k], y = b[i][k];
            const double denom = std::max({std::abs(x), std::abs(y), floor});
            worst = std::max(worst, std::abs(x - y) / denom);
        }
    }
    return worst;
}

}  // namespace gcl
