#include "csrnet/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace csrnet::nn {

std::vector<Tensor64> finite_difference_gradient(const LossFunction& loss,
                                                 std::vector<Tensor64> params,
                                                 double epsilon) {
  if (!(epsilon > 0.0)) {
    throw std::invalid_argument("finite difference epsilon must be positive");
  }
  std::vector<Tensor64> grads;
  grads.reserve(params.size());
  for (const auto& p : params) grads.emplace_back(p.shape());

  for (std::size_t t = 0; t < params.size(); ++t) {
    for (std::size_t i = 0; i < params[t].size(); ++i) {
      const double saved = params[t][i];
      params[t][i] = saved + epsilon;
      const double plus = loss(params);
      params[t][i] = saved - epsilon;
      const double minus = loss(params);
      params[t][i] = saved;
      grads[t][i] = (plus - minus) / (2.0 * epsilon);
    }
  }
  return grads;
}

double relative_error(double analytic, double numeric, double floor) {
  const double scale =
      std::max({std::abs(analytic), std::abs(numeric), floor});
  return std::abs(analytic - numeric) / scale;
}

double max_relative_error(const Tensor64& analytic, const Tensor64& numeric,
                          double floor) {
  if (analytic.shape() != numeric.shape()) {
    throw std::invalid_argument("gradient shape mismatch: " +
                                to_string(analytic.shape()) + " vs " +
                                to_string(numeric.shape()));
  }
  double worst = 0.0;
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    worst = std::max(worst, relative_error(analytic[i], numeric[i], floor));
  }
  return worst;
}

}  // namespace csrnet::nn
