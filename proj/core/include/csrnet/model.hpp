#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "csrnet/image.hpp"
#include "csrnet/ops.hpp"
#include "csrnet/tensor.hpp"

namespace csrnet {

enum class PriorKind { brightness, avg_intensity, histogram };

/// Where the modulation heads get their input from.
enum class ConditionSource {
  learned,             // condition network only
  prior,               // a hand-crafted global prior only
  learned_plus_prior,  // condition network output followed by the prior
};

std::size_t prior_dim(PriorKind kind);
std::string to_string(PriorKind kind);
std::string to_string(ConditionSource source);
PriorKind parse_prior_kind(const std::string& text);
ConditionSource parse_condition_source(const std::string& text);

struct ModelConfig {
  std::size_t base_layers = 3;
  std::size_t base_channels = 64;
  std::size_t base_kernel = 1;
  std::size_t cond_channels = 32;
  std::size_t cond_vector_dim = 32;
  std::size_t cond_first_kernel = 7;
  ConditionSource condition_source = ConditionSource::learned;
  PriorKind prior_kind = PriorKind::brightness;

  void validate() const;
  bool has_condition_network() const {
    return condition_source != ConditionSource::prior;
  }
  bool uses_prior() const { return condition_source != ConditionSource::learned; }
  /// Length of the vector fed to the modulation heads.
  std::size_t condition_dim() const;
  /// Channel count entering / leaving base layer `layer`.
  std::size_t base_in_channels(std::size_t layer) const;
  std::size_t base_out_channels(std::size_t layer) const;

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

template <typename T>
struct ConvLayer {
  BasicTensor<T> weight;  // C_out x C_in x k x k
  BasicTensor<T> bias;    // C_out
  nn::Conv2dOptions options;
};

template <typename T>
struct LinearLayer {
  BasicTensor<T> weight;  // out x in
  BasicTensor<T> bias;    // out
};

/// All learnable tensors of the network. The same structure holds gradients.
template <typename T>
struct BasicModelParams {
  ModelConfig config;
  std::vector<ConvLayer<T>> base;
  std::vector<ConvLayer<T>> condition;
  std::vector<LinearLayer<T>> gamma_heads;  // one per base layer
  std::vector<LinearLayer<T>> beta_heads;

  /// Visits every tensor in checkpoint order as f(name, tensor).
  template <typename F>
  void for_each_tensor(F&& f) {
    visit(*this, f);
  }
  template <typename F>
  void for_each_tensor(F&& f) const {
    visit(*this, f);
  }

  template <typename U>
  BasicModelParams<U> cast() const;

  /// Same layout with every tensor zeroed.
  BasicModelParams zeros_like() const;

  friend bool operator==(const BasicModelParams& a, const BasicModelParams& b) {
    if (!(a.config == b.config)) return false;
    bool equal = true;
    std::vector<const BasicTensor<T>*> rhs;
    b.for_each_tensor([&](const std::string&, const BasicTensor<T>& t) { rhs.push_back(&t); });
    std::size_t i = 0;
    a.for_each_tensor([&](const std::string&, const BasicTensor<T>& t) {
      equal = equal && i < rhs.size() && t == *rhs[i];
      ++i;
    });
    return equal && i == rhs.size();
  }

 private:
  template <typename Self, typename F>
  static void visit(Self& self, F& f) {
    for (std::size_t i = 0; i < self.base.size(); ++i) {
      f("base." + std::to_string(i) + ".weight", self.base[i].weight);
      f("base." + std::to_string(i) + ".bias", self.base[i].bias);
    }
    for (std::size_t i = 0; i < self.condition.size(); ++i) {
      f("cond." + std::to_string(i) + ".weight", self.condition[i].weight);
      f("cond." + std::to_string(i) + ".bias", self.condition[i].bias);
    }
    for (std::size_t i = 0; i < self.gamma_heads.size(); ++i) {
      f("head.gamma." + std::to_string(i) + ".weight", self.gamma_heads[i].weight);
      f("head.gamma." + std::to_string(i) + ".bias", self.gamma_heads[i].bias);
    }
    for (std::size_t i = 0; i < self.beta_heads.size(); ++i) {
      f("head.beta." + std::to_string(i) + ".weight", self.beta_heads[i].weight);
      f("head.beta." + std::to_string(i) + ".bias", self.beta_heads[i].bias);
    }
  }
};

template <typename T>
template <typename U>
BasicModelParams<U> BasicModelParams<T>::cast() const {
  BasicModelParams<U> out;
  out.config = config;
  auto conv = [](const ConvLayer<T>& l) {
    return ConvLayer<U>{l.weight.template cast<U>(), l.bias.template cast<U>(), l.options};
  };
  auto linear = [](const LinearLayer<T>& l) {
    return LinearLayer<U>{l.weight.template cast<U>(), l.bias.template cast<U>()};
  };
  for (const auto& l : base) out.base.push_back(conv(l));
  for (const auto& l : condition) out.condition.push_back(conv(l));
  for (const auto& l : gamma_heads) out.gamma_heads.push_back(linear(l));
  for (const auto& l : beta_heads) out.beta_heads.push_back(linear(l));
  return out;
}

template <typename T>
BasicModelParams<T> BasicModelParams<T>::zeros_like() const {
  BasicModelParams out = *this;
  out.for_each_tensor([](const std::string&, BasicTensor<T>& t) { t.fill(T{0}); });
  return out;
}

using ModelParams = BasicModelParams<float>;
using ModelParams64 = BasicModelParams<double>;

/// Parameter groups, keyed by tensor-name prefix.
enum class ParamGroup { base, condition, gamma_heads, beta_heads };
ParamGroup group_of(const std::string& tensor_name);

/// Layout only: every tensor allocated and zero.
ModelParams allocate_model(const ModelConfig& config);

/// He-normal convolutions with zero biases; modulation heads start at
/// gamma = 1, beta = 0 with zero weights. Deterministic per seed.
ModelParams build_model(const ModelConfig& config, std::uint64_t seed);

std::size_t count_parameters(const ModelParams& params);
std::size_t count_base_parameters(const ModelParams& params);
std::size_t count_condition_parameters(const ModelParams& params);
std::size_t count_head_parameters(const ModelParams& params);

/// Smallest side the condition network accepts.
inline constexpr std::size_t kMinConditionExtent = 8;

template <typename T>
struct Modulation {
  std::vector<BasicTensor<T>> gamma;
  std::vector<BasicTensor<T>> beta;
};

/// Every intermediate of one forward pass, kept for the backward pass.
template <typename T>
struct ForwardTrace {
  BasicTensor<T> input;
  std::vector<BasicTensor<T>> cond_pre;   // condition conv outputs before ReLU
  std::vector<BasicTensor<T>> cond_post;  // after ReLU
  BasicTensor<T> condition;               // vector fed to the heads
  bool condition_supplied = false;        // true when bypassing extraction
  Modulation<T> modulation;
  std::vector<BasicTensor<T>> base_conv;  // base conv outputs
  std::vector<BasicTensor<T>> base_mod;   // after GFM, before ReLU
  BasicTensor<T> output;                  // unclamped
};

/// Hand-crafted global statistics of an image (brightness: 1 value,
/// avg_intensity: 3 channel means, histogram: 3 x 256 normalized bins).
Tensor hand_crafted_prior(const ImageRGB& image, PriorKind kind);

/// Runs the full network, keeping intermediates. When `condition` is given
/// the condition path is skipped and that vector drives the heads.
template <typename T>
ForwardTrace<T> trace_forward(const BasicModelParams<T>& params,
                              const ImageRGB& image,
                              const BasicTensor<T>* condition = nullptr);

/// Gradients of a scalar loss w.r.t. every parameter given dL/d(output).
template <typename T>
BasicModelParams<T> trace_backward(const BasicModelParams<T>& params,
                                   const ForwardTrace<T>& trace,
                                   const BasicTensor<T>& output_grad);

/// Sign pattern of every ReLU input in the trace, hashed. Finite differences
/// are only meaningful while this stays fixed.
template <typename T>
std::uint64_t activation_pattern(const ForwardTrace<T>& trace);

template <typename T>
Modulation<T> modulation_from_condition(const BasicModelParams<T>& params,
                                        const BasicTensor<T>& condition);

/// Condition vector per the configured source.
Tensor condition_vector(const ModelParams& params, const ImageRGB& image);

/// Retouched image clamped to [0, 1], same resolution as the input.
ImageRGB forward(const ModelParams& params, const ImageRGB& image);

ImageRGB forward_with_condition(const ModelParams& params, const Tensor& condition,
                                const ImageRGB& image);

/// Base network with identity modulation (gamma = 1, beta = 0).
ImageRGB base_only_forward(const ModelParams& params, const ImageRGB& image);

}  // namespace csrnet
