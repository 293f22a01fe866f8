#pragma once

#include <functional>
#include <vector>

#include "gcl/tensor.h"

namespace gcl {

// Central differences (f(w + eps) - f(w - eps)) / (2 eps), one coordinate at
// a time, for every parameter in `params`. `f` must be deterministic in the
// parameter values. Parameter values are restored afterwards.
std::vector<Matrix> finite_difference_gradient(const std::function<double()>& f,
                                               std::vector<Parameter*> params, double eps = 1e-5);

// max over coordinates of |a - b| / max(|a|, |b|, floor).
double max_relative_error(const std::vector<Matrix>& a, const std::vector<Matrix>& b, double floor = 1e-8);

}  // namespace gcl
