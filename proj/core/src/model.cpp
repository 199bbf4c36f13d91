#include "csrnet/model.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

#include "csrnet/classic_ops.hpp"

namespace csrnet {

namespace {

void require(bool condition, const std::string& message) {
  if (!condition) throw std::invalid_argument(message);
}

// Strides and paddings of the three condition convolutions.
nn::Conv2dOptions condition_options(const ModelConfig& config, std::size_t layer) {
  const std::size_t k = layer == 0 ? config.cond_first_kernel : 3;
  return {2, (k - 1) / 2};
}

constexpr std::size_t kConditionLayers = 3;

template <typename T>
BasicTensor<T> concat(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  std::vector<T> data(a.data().begin(), a.data().end());
  data.insert(data.end(), b.data().begin(), b.data().end());
  const std::size_t n = data.size();
  return BasicTensor<T>({n}, std::move(data));
}

}  // namespace

std::size_t prior_dim(PriorKind kind) {
  switch (kind) {
    case PriorKind::brightness: return 1;
    case PriorKind::avg_intensity: return 3;
    case PriorKind::histogram: return 768;
  }
  throw std::invalid_argument("unknown prior kind");
}

std::string to_string(PriorKind kind) {
  switch (kind) {
    case PriorKind::brightness: return "brightness";
    case PriorKind::avg_intensity: return "avg_intensity";
    case PriorKind::histogram: return "histogram";
  }
  return "unknown";
}

std::string to_string(ConditionSource source) {
  switch (source) {
    case ConditionSource::learned: return "learned";
    case ConditionSource::prior: return "prior";
    case ConditionSource::learned_plus_prior: return "learned_plus_prior";
  }
  return "unknown";
}

PriorKind parse_prior_kind(const std::string& text) {
  if (text == "brightness") return PriorKind::brightness;
  if (text == "avg_intensity") return PriorKind::avg_intensity;
  if (text == "histogram") return PriorKind::histogram;
  throw std::invalid_argument("unknown prior kind '" + text + "'");
}

ConditionSource parse_condition_source(const std::string& text) {
  if (text == "learned") return ConditionSource::learned;
  if (text == "prior") return ConditionSource::prior;
  if (text == "learned_plus_prior") return ConditionSource::learned_plus_prior;
  throw std::invalid_argument("unknown condition source '" + text + "'");
}

void ModelConfig::validate() const {
  require(base_layers >= 2, "base_layers must be at least 2");
  require(base_channels > 0 && cond_channels > 0 && cond_vector_dim > 0,
          "channel counts must be positive");
  require(base_kernel % 2 == 1, "base_kernel must be odd");
  require(cond_first_kernel % 2 == 1, "cond_first_kernel must be odd");
  (void)prior_dim(prior_kind);
}

std::size_t ModelConfig::condition_dim() const {
  switch (condition_source) {
    case ConditionSource::learned: return cond_vector_dim;
    case ConditionSource::prior: return prior_dim(prior_kind);
    case ConditionSource::learned_plus_prior:
      return cond_vector_dim + prior_dim(prior_kind);
  }
  throw std::invalid_argument("unknown condition source");
}

std::size_t ModelConfig::base_in_channels(std::size_t layer) const {
  return layer == 0 ? 3 : base_channels;
}

std::size_t ModelConfig::base_out_channels(std::size_t layer) const {
  return layer + 1 == base_layers ? 3 : base_channels;
}

ParamGroup group_of(const std::string& name) {
  if (name.rfind("base.", 0) == 0) return ParamGroup::base;
  if (name.rfind("cond.", 0) == 0) return ParamGroup::condition;
  if (name.rfind("head.gamma.", 0) == 0) return ParamGroup::gamma_heads;
  if (name.rfind("head.beta.", 0) == 0) return ParamGroup::beta_heads;
  throw std::invalid_argument("unknown parameter tensor '" + name + "'");
}

ModelParams allocate_model(const ModelConfig& config) {
  config.validate();
  ModelParams p;
  p.config = config;
  const std::size_t k = config.base_kernel;
  for (std::size_t l = 0; l < config.base_layers; ++l) {
    const std::size_t cin = config.base_in_channels(l);
    const std::size_t cout = config.base_out_channels(l);
    p.base.push_back({Tensor({cout, cin, k, k}), Tensor({cout}), {1, (k - 1) / 2}});
  }
  if (config.has_condition_network()) {
    for (std::size_t l = 0; l < kConditionLayers; ++l) {
      const std::size_t kc = l == 0 ? config.cond_first_kernel : 3;
      const std::size_t cin = l == 0 ? 3 : config.cond_channels;
      const std::size_t cout =
          l + 1 == kConditionLayers ? config.cond_vector_dim : config.cond_channels;
      p.condition.push_back(
          {Tensor({cout, cin, kc, kc}), Tensor({cout}), condition_options(config, l)});
    }
  }
  const std::size_t cdim = config.condition_dim();
  for (std::size_t l = 0; l < config.base_layers; ++l) {
    const std::size_t cout = config.base_out_channels(l);
    p.gamma_heads.push_back({Tensor({cout, cdim}), Tensor({cout})});
    p.beta_heads.push_back({Tensor({cout, cdim}), Tensor({cout})});
  }
  return p;
}

ModelParams build_model(const ModelConfig& config, std::uint64_t seed) {
  ModelParams p = allocate_model(config);
  std::mt19937_64 rng(seed);
  auto he_init = [&rng](Tensor& weight) {
    const std::size_t fan_in = weight.dim(1) * weight.dim(2) * weight.dim(3);
    std::normal_distribution<double> normal(0.0, std::sqrt(2.0 / static_cast<double>(fan_in)));
    for (float& w : weight.data()) w = static_cast<float>(normal(rng));
  };
  for (auto& layer : p.base) he_init(layer.weight);
  for (auto& layer : p.condition) he_init(layer.weight);
  for (auto& head : p.gamma_heads) head.bias.fill(1.0f);
  return p;
}

namespace {

std::size_t count_if_group(const ModelParams& params, ParamGroup group, bool all) {
  std::size_t total = 0;
  params.for_each_tensor([&](const std::string& name, const Tensor& t) {
    if (all || group_of(name) == group) total += t.size();
  });
  return total;
}

}  // namespace

std::size_t count_parameters(const ModelParams& params) {
  return count_if_group(params, ParamGroup::base, true);
}
std::size_t count_base_parameters(const ModelParams& params) {
  return count_if_group(params, ParamGroup::base, false);
}
std::size_t count_condition_parameters(const ModelParams& params) {
  return count_if_group(params, ParamGroup::condition, false);
}
std::size_t count_head_parameters(const ModelParams& params) {
  return count_if_group(params, ParamGroup::gamma_heads, false) +
         count_if_group(params, ParamGroup::beta_heads, false);
}

Tensor hand_crafted_prior(const ImageRGB& image, PriorKind kind) {
  switch (kind) {
    case PriorKind::brightness: {
      const Tensor luma = retouch::luminance(image);
      double acc = 0.0;
      for (float v : luma.data()) acc += v;
      return Tensor({1}, {static_cast<float>(acc / static_cast<double>(luma.size()))});
    }
    case PriorKind::avg_intensity: {
      const auto means = retouch::channel_means(image);
      return Tensor({3}, {static_cast<float>(means[0]), static_cast<float>(means[1]),
                          static_cast<float>(means[2])});
    }
    case PriorKind::histogram: {
      Tensor hist({768});
      const float weight = 1.0f / static_cast<float>(image.pixel_count());
      std::vector<std::size_t> counts(768, 0);
      for (std::size_t c = 0; c < 3; ++c) {
        for (float v : image.channel(c)) {
          const double level = std::clamp(static_cast<double>(v), 0.0, 1.0) * 255.0;
          counts[c * 256 + static_cast<std::size_t>(std::lround(level))] += 1;
        }
      }
      for (std::size_t i = 0; i < counts.size(); ++i) {
        hist[i] = static_cast<float>(counts[i]) * weight;
      }
      return hist;
    }
  }
  throw std::invalid_argument("unknown prior kind");
}

template <typename T>
Modulation<T> modulation_from_condition(const BasicModelParams<T>& params,
                                        const BasicTensor<T>& condition) {
  const std::size_t cdim = params.config.condition_dim();
  require(condition.rank() == 1 && condition.dim(0) == cdim,
          "condition vector must have " + std::to_string(cdim) + " entries, got " +
              to_string(condition.shape()));
  require(condition.all_finite(), "condition vector must be finite");
  Modulation<T> m;
  for (std::size_t l = 0; l < params.gamma_heads.size(); ++l) {
    m.gamma.push_back(nn::fully_connected(condition, params.gamma_heads[l].weight,
                                          params.gamma_heads[l].bias));
    m.beta.push_back(nn::fully_connected(condition, params.beta_heads[l].weight,
                                         params.beta_heads[l].bias));
  }
  return m;
}

template <typename T>
ForwardTrace<T> trace_forward(const BasicModelParams<T>& params, const ImageRGB& image,
                              const BasicTensor<T>* condition) {
  const ModelConfig& config = params.config;
  ForwardTrace<T> trace;
  trace.input = image.tensor().template cast<T>();

  if (condition != nullptr) {
    trace.condition = *condition;
    trace.condition_supplied = true;
  } else {
    BasicTensor<T> learned;
    if (config.has_condition_network()) {
      if (image.height() < kMinConditionExtent || image.width() < kMinConditionExtent) {
        throw std::invalid_argument(
            "image is " + std::to_string(image.height()) + "x" +
            std::to_string(image.width()) + "; the condition network needs at least " +
            std::to_string(kMinConditionExtent) + "x" +
            std::to_string(kMinConditionExtent));
      }
      const BasicTensor<T>* x = &trace.input;
      for (const auto& layer : params.condition) {
        trace.cond_pre.push_back(
            nn::conv2d_forward(*x, layer.weight, layer.bias, layer.options));
        trace.cond_post.push_back(nn::relu(trace.cond_pre.back()));
        x = &trace.cond_post.back();
      }
      learned = nn::global_average_pool(*x);
    }
    switch (config.condition_source) {
      case ConditionSource::learned:
        trace.condition = std::move(learned);
        break;
      case ConditionSource::prior:
        trace.condition = hand_crafted_prior(image, config.prior_kind).template cast<T>();
        break;
      case ConditionSource::learned_plus_prior:
        trace.condition =
            concat(learned, hand_crafted_prior(image, config.prior_kind).template cast<T>());
        break;
    }
  }

  trace.modulation = modulation_from_condition(params, trace.condition);

  const BasicTensor<T>* x = &trace.input;
  BasicTensor<T> activated;
  const std::size_t layers = params.base.size();
  for (std::size_t l = 0; l < layers; ++l) {
    const auto& layer = params.base[l];
    trace.base_conv.push_back(
        nn::conv2d_forward(*x, layer.weight, layer.bias, layer.options));
    trace.base_mod.push_back(nn::gfm(trace.base_conv.back(), trace.modulation.gamma[l],
                                     trace.modulation.beta[l]));
    if (l + 1 < layers) {
      activated = nn::relu(trace.base_mod.back());
      x = &activated;
    }
  }
  trace.output = trace.base_mod.back();
  return trace;
}

template <typename T>
BasicModelParams<T> trace_backward(const BasicModelParams<T>& params,
                                   const ForwardTrace<T>& trace,
                                   const BasicTensor<T>& output_grad) {
  require(output_grad.shape() == trace.output.shape(),
          "output gradient shape " + to_string(output_grad.shape()) +
              " does not match output " + to_string(trace.output.shape()));
  BasicModelParams<T> grads = params.zeros_like();
  const std::size_t layers = params.base.size();

  std::vector<BasicTensor<T>> gamma_grad(layers);
  std::vector<BasicTensor<T>> beta_grad(layers);
  BasicTensor<T> g = output_grad;
  for (std::size_t l = layers; l-- > 0;) {
    if (l + 1 < layers) g = nn::relu_backward(trace.base_mod[l], g);
    auto mod = nn::gfm_backward(trace.base_conv[l], trace.modulation.gamma[l], g);
    gamma_grad[l] = std::move(mod.gamma);
    beta_grad[l] = std::move(mod.beta);
    const BasicTensor<T> layer_input =
        l == 0 ? trace.input : nn::relu(trace.base_mod[l - 1]);
    auto conv = nn::conv2d_backward(layer_input, params.base[l].weight,
                                    params.base[l].options, mod.feature, l > 0);
    grads.base[l].weight = std::move(conv.weight);
    grads.base[l].bias = std::move(conv.bias);
    g = std::move(conv.input);
  }

  BasicTensor<T> condition_grad(trace.condition.shape());
  for (std::size_t l = 0; l < layers; ++l) {
    auto gh = nn::fully_connected_backward(trace.condition, params.gamma_heads[l].weight,
                                           gamma_grad[l]);
    auto bh = nn::fully_connected_backward(trace.condition, params.beta_heads[l].weight,
                                           beta_grad[l]);
    grads.gamma_heads[l].weight = std::move(gh.weight);
    grads.gamma_heads[l].bias = std::move(gh.bias);
    grads.beta_heads[l].weight = std::move(bh.weight);
    grads.beta_heads[l].bias = std::move(bh.bias);
    for (std::size_t i = 0; i < condition_grad.size(); ++i) {
      condition_grad[i] += gh.input[i] + bh.input[i];
    }
  }

  if (trace.condition_supplied || !params.config.has_condition_network()) {
    return grads;
  }

  // The learned part occupies the leading entries of the condition vector.
  const std::size_t learned_dim = params.config.cond_vector_dim;
  BasicTensor<T> pooled_grad({learned_dim});
  std::copy_n(condition_grad.raw(), learned_dim, pooled_grad.raw());
  g = nn::global_average_pool_backward(trace.cond_post.back().shape(), pooled_grad);
  for (std::size_t l = params.condition.size(); l-- > 0;) {
    g = nn::relu_backward(trace.cond_pre[l], g);
    const BasicTensor<T>& layer_input = l == 0 ? trace.input : trace.cond_post[l - 1];
    auto conv = nn::conv2d_backward(layer_input, params.condition[l].weight,
                                    params.condition[l].options, g, l > 0);
    grads.condition[l].weight = std::move(conv.weight);
    grads.condition[l].bias = std::move(conv.bias);
    g = std::move(conv.input);
  }
  return grads;
}

template <typename T>
std::uint64_t activation_pattern(const ForwardTrace<T>& trace) {
  // FNV-1a over the sign bits.
  std::uint64_t hash = 1469598103934665603ull;
  auto mix = [&hash](const BasicTensor<T>& t) {
    for (T v : t.data()) {
      hash ^= v > T{0} ? 1u : 0u;
      hash *= 1099511628211ull;
    }
  };
  for (const auto& t : trace.cond_pre) mix(t);
  for (std::size_t l = 0; l + 1 < trace.base_mod.size(); ++l) mix(trace.base_mod[l]);
  return hash;
}

Tensor condition_vector(const ModelParams& params, const ImageRGB& image) {
  const ModelConfig& config = params.config;
  Tensor learned;
  if (config.has_condition_network()) {
    if (image.height() < kMinConditionExtent || image.width() < kMinConditionExtent) {
      throw std::invalid_argument("image is too small for the condition network");
    }
    Tensor x = image.tensor();
    for (const auto& layer : params.condition) {
      x = nn::relu(nn::conv2d_forward(x, layer.weight, layer.bias, layer.options));
    }
    learned = nn::global_average_pool(x);
  }
  switch (config.condition_source) {
    case ConditionSource::learned: return learned;
    case ConditionSource::prior: return hand_crafted_prior(image, config.prior_kind);
    case ConditionSource::learned_plus_prior:
      return concat(learned, hand_crafted_prior(image, config.prior_kind));
  }
  throw std::invalid_argument("unknown condition source");
}

namespace {

ImageRGB run_base(const ModelParams& params, const Modulation<float>& modulation,
                  const ImageRGB& image) {
  Tensor x = image.tensor();
  const std::size_t layers = params.base.size();
  for (std::size_t l = 0; l < layers; ++l) {
    const auto& layer = params.base[l];
    x = nn::gfm(nn::conv2d_forward(x, layer.weight, layer.bias, layer.options),
                modulation.gamma[l], modulation.beta[l]);
    if (l + 1 < layers) x = nn::relu(x);
  }
  return clamp01(ImageRGB(std::move(x)));
}

}  // namespace

ImageRGB forward_with_condition(const ModelParams& params, const Tensor& condition,
                                const ImageRGB& image) {
  return run_base(params, modulation_from_condition(params, condition), image);
}

ImageRGB forward(const ModelParams& params, const ImageRGB& image) {
  return forward_with_condition(params, condition_vector(params, image), image);
}

ImageRGB base_only_forward(const ModelParams& params, const ImageRGB& image) {
  Modulation<float> identity;
  for (std::size_t l = 0; l < params.base.size(); ++l) {
    const std::size_t c = params.config.base_out_channels(l);
    identity.gamma.emplace_back(Shape{c}, 1.0f);
    identity.beta.emplace_back(Shape{c}, 0.0f);
  }
  return run_base(params, identity, image);
}

#define CSRNET_INSTANTIATE_MODEL(T)                                                  \
  template Modulation<T> modulation_from_condition(const BasicModelParams<T>&,      \
                                                   const BasicTensor<T>&);          \
  template ForwardTrace<T> trace_forward(const BasicModelParams<T>&, const ImageRGB&, \
                                         const BasicTensor<T>*);                    \
  template BasicModelParams<T> trace_backward(const BasicModelParams<T>&,           \
                                              const ForwardTrace<T>&,               \
                                              const BasicTensor<T>&);               \
  template std::uint64_t activation_pattern(const ForwardTrace<T>&);

CSRNET_INSTANTIATE_MODEL(float)
CSRNET_INSTANTIATE_MODEL(double)

#undef CSRNET_INSTANTIATE_MODEL

}  // namespace csrnet
