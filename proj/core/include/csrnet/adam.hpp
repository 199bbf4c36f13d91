#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "csrnet/tensor.hpp"

namespace csrnet::nn {

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Moment estimates for a fixed list of parameter tensors.
class AdamState {
 public:
  AdamState() = default;
  AdamState(std::span<const Tensor* const> params, AdamConfig config = {});

  const AdamConfig& config() const noexcept { return config_; }
  std::uint64_t step() const noexcept { return step_; }
  const std::vector<Tensor>& first_moments() const noexcept { return m_; }
  const std::vector<Tensor>& second_moments() const noexcept { return v_; }

  /// One bias-corrected Adam update of `params` in place. Parameter i pairs
  /// with gradient i and with the moments created for it.
  void apply(std::span<Tensor* const> params, std::span<const Tensor* const> grads,
             double step_size);

 private:
  AdamConfig config_;
  std::vector<Tensor> m_;
  std::vector<Tensor> v_;
  std::uint64_t step_ = 0;
};

}  // namespace csrnet::nn
