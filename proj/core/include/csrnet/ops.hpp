#pragma once

#include <cstddef>

#include "csrnet/tensor.hpp"

/// Forward and backward passes for the layers the retouching network uses.
/// Every function is pure, and is instantiated for float and double.
namespace csrnet::nn {

struct Conv2dOptions {
  std::size_t stride = 1;
  std::size_t padding = 0;  // zero padding on every side
};

/// Output extent of a convolution along one axis; throws when it would be
/// empty.
std::size_t conv_output_extent(std::size_t input, std::size_t kernel,
                               const Conv2dOptions& options);

template <typename T>
struct ConvGrads {
  BasicTensor<T> weight;
  BasicTensor<T> bias;
  BasicTensor<T> input;  // empty when not requested
};

template <typename T>
struct LinearGrads {
  BasicTensor<T> weight;
  BasicTensor<T> bias;
  BasicTensor<T> input;
};

template <typename T>
struct GfmGrads {
  BasicTensor<T> feature;
  BasicTensor<T> gamma;
  BasicTensor<T> beta;
};

/// Cross-correlation of a C_in x H x W map with a C_out x C_in x k x k
/// kernel.
template <typename T>
BasicTensor<T> conv2d_forward(const BasicTensor<T>& input,
                              const BasicTensor<T>& weight,
                              const BasicTensor<T>& bias,
                              const Conv2dOptions& options = {});

template <typename T>
ConvGrads<T> conv2d_backward(const BasicTensor<T>& input,
                             const BasicTensor<T>& weight,
                             const Conv2dOptions& options,
                             const BasicTensor<T>& upstream,
                             bool want_input_grad = true);

template <typename T>
BasicTensor<T> relu(const BasicTensor<T>& input);

/// Masks `upstream` where `input` <= 0; the subgradient at zero is zero.
template <typename T>
BasicTensor<T> relu_backward(const BasicTensor<T>& input,
                             const BasicTensor<T>& upstream);

template <typename T>
BasicTensor<T> global_average_pool(const BasicTensor<T>& input);

template <typename T>
BasicTensor<T> global_average_pool_backward(const Shape& input_shape,
                                            const BasicTensor<T>& upstream);

/// out = weight * input + bias, with weight m x n.
template <typename T>
BasicTensor<T> fully_connected(const BasicTensor<T>& input,
                               const BasicTensor<T>& weight,
                               const BasicTensor<T>& bias);

template <typename T>
LinearGrads<T> fully_connected_backward(const BasicTensor<T>& input,
                                        const BasicTensor<T>& weight,
                                        const BasicTensor<T>& upstream);

/// Global feature modulation: out[c,h,w] = gamma[c] * feature[c,h,w] + beta[c].
template <typename T>
BasicTensor<T> gfm(const BasicTensor<T>& feature, const BasicTensor<T>& gamma,
                   const BasicTensor<T>& beta);

template <typename T>
GfmGrads<T> gfm_backward(const BasicTensor<T>& feature,
                         const BasicTensor<T>& gamma,
                         const BasicTensor<T>& upstream);

}  // namespace csrnet::nn
