#include "csrnet/adam.hpp"

#include <cmath>
#include <stdexcept>

namespace csrnet::nn {

AdamState::AdamState(std::span<const Tensor* const> params, AdamConfig config)
    : config_(config) {
  m_.reserve(params.size());
  v_.reserve(params.size());
  for (const Tensor* p : params) {
    m_.emplace_back(p->shape());
    v_.emplace_back(p->shape());
  }
}

void AdamState::apply(std::span<Tensor* const> params,
                      std::span<const Tensor* const> grads, double step_size) {
  if (!(step_size > 0.0)) {
    throw std::invalid_argument("adam step size must be positive");
  }
  if (params.size() != m_.size() || grads.size() != m_.size()) {
    throw std::invalid_argument("adam expects " + std::to_string(m_.size()) +
                                " parameter/gradient tensors");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i]->shape() != m_[i].shape() ||
        grads[i]->shape() != m_[i].shape()) {
      throw std::invalid_argument("adam tensor " + std::to_string(i) +
                                  " shape mismatch: " +
                                  to_string(params[i]->shape()));
    }
  }

  ++step_;
  const double b1 = config_.beta1;
  const double b2 = config_.beta2;
  const double t = static_cast<double>(step_);
  const double correction1 = 1.0 - std::pow(b1, t);
  const double correction2 = 1.0 - std::pow(b2, t);

  for (std::size_t i = 0; i < params.size(); ++i) {
    float* p = params[i]->raw();
    const float* g = grads[i]->raw();
    float* m = m_[i].raw();
    float* v = v_[i].raw();
    for (std::size_t j = 0; j < m_[i].size(); ++j) {
      const double grad = g[j];
      const double mj = b1 * m[j] + (1.0 - b1) * grad;
      const double vj = b2 * v[j] + (1.0 - b2) * grad * grad;
      m[j] = static_cast<float>(mj);
      v[j] = static_cast<float>(vj);
      const double update = step_size * (mj / correction1) /
                            (std::sqrt(vj / correction2) + config_.epsilon);
      p[j] = static_cast<float>(p[j] - update);
    }
  }
}

}  // namespace csrnet::nn
