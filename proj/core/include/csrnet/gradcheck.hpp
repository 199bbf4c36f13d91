#pragma once

#include <functional>
#include <vector>

#include "csrnet/tensor.hpp"

namespace csrnet::nn {

using LossFunction = std::function<double(const std::vector<Tensor64>&)>;

/// Central differences (f(x+eps) - f(x-eps)) / 2eps for every scalar of every
/// tensor in `params`.
std::vector<Tensor64> finite_difference_gradient(const LossFunction& loss,
                                                 std::vector<Tensor64> params,
                                                 double epsilon = 1e-5);

/// |a - b| / max(|a|, |b|, floor). The floor keeps gradients that are zero in
/// exact arithmetic from turning rounding noise into a large ratio.
double relative_error(double analytic, double numeric, double floor = 1e-6);

double max_relative_error(const Tensor64& analytic, const Tensor64& numeric,
                          double floor = 1e-6);

}  // namespace csrnet::nn
