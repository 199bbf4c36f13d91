#include <doctest.h>

#include <numeric>
#include <random>

#include "csrnet/gradcheck.hpp"
#include "csrnet/model.hpp"
#include "fixtures.hpp"

using namespace csrnet;
using csrnet::testing::constant_image;
using csrnet::testing::random_image;
using csrnet::testing::random_tensor;

namespace {

std::size_t conv_count(std::size_t k, std::size_t cin, std::size_t cout) {
  return k * k * cin * cout + cout;
}

// Randomizes the head weights so modulation actually depends on the condition.
ModelParams with_active_heads(ModelParams params, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  params.for_each_tensor([&](const std::string& name, Tensor& t) {
    if (name.rfind("head.", 0) == 0 && name.ends_with(".weight")) {
      t = random_tensor<float>(t.shape(), rng, -0.05, 0.05);
    }
  });
  return params;
}

ImageRGB crop(const ImageRGB& image, std::size_t y0, std::size_t x0, std::size_t h, std::size_t w) {
  ImageRGB out(h, w);
  for (std::size_t c = 0; c < 3; ++c)
    for (std::size_t y = 0; y < h; ++y)
      for (std::size_t x = 0; x < w; ++x) out.at(c, y, x) = image.at(c, y0 + y, x0 + x);
  return out;
}

}  // namespace

TEST_CASE("parameter counts") {
  const ModelParams params = build_model(ModelConfig{}, 1);
  CHECK(count_parameters(params) == 36489);
  CHECK(count_base_parameters(params) == 4611);
  CHECK(count_condition_parameters(params) == 23232);
  CHECK(count_head_parameters(params) == 8646);

  // Per-layer arithmetic.
  CHECK(conv_count(1, 3, 64) + conv_count(1, 64, 64) + conv_count(1, 64, 3) == 4611);
  CHECK(conv_count(7, 3, 32) == 4736);
  CHECK(conv_count(3, 32, 32) == 9248);
  CHECK(2 * (32 * 64 + 64) * 2 + 2 * (32 * 3 + 3) == 8646);

  std::size_t by_hand = 0;
  params.for_each_tensor([&](const std::string&, const Tensor& t) { by_hand += t.size(); });
  CHECK(by_hand == 36489);
}

TEST_CASE("prior-driven configurations") {
  struct Row {
    ConditionSource source;
    PriorKind kind;
    std::size_t dim;
  };
  const Row rows[] = {{ConditionSource::prior, PriorKind::brightness, 1},
                      {ConditionSource::prior, PriorKind::avg_intensity, 3},
                      {ConditionSource::prior, PriorKind::histogram, 768},
                      {ConditionSource::learned_plus_prior, PriorKind::brightness, 33},
                      {ConditionSource::learned_plus_prior, PriorKind::histogram, 800}};
  for (const auto& row : rows) {
    ModelConfig config;
    config.condition_source = row.source;
    config.prior_kind = row.kind;
    CHECK(config.condition_dim() == row.dim);
    const ModelParams params = build_model(config, 3);
    CHECK(count_head_parameters(params) == 2 * (row.dim + 1) * (64 + 64 + 3));
    CHECK(count_condition_parameters(params) ==
          (config.has_condition_network() ? 23232u : 0u));
    const ImageRGB out = forward(params, constant_image(8, 8, 0.2f, 0.4f, 0.6f));
    CHECK(out.height() == 8);
  }
}

TEST_CASE("config validation and parsing") {
  ModelConfig bad;
  bad.base_channels = 0;
  CHECK_THROWS_AS(build_model(bad, 0), std::invalid_argument);
  bad = ModelConfig{};
  bad.base_layers = 0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = ModelConfig{};
  bad.cond_first_kernel = 0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);

  for (auto k : {PriorKind::brightness, PriorKind::avg_intensity, PriorKind::histogram})
    CHECK(parse_prior_kind(to_string(k)) == k);
  for (auto s : {ConditionSource::learned, ConditionSource::prior, ConditionSource::learned_plus_prior})
    CHECK(parse_condition_source(to_string(s)) == s);
  CHECK_THROWS_AS(parse_prior_kind("sharpness"), std::invalid_argument);

  CHECK(group_of("base.0.weight") == ParamGroup::base);
  CHECK(group_of("cond.2.bias") == ParamGroup::condition);
  CHECK(group_of("head.gamma.1.weight") == ParamGroup::gamma_heads);
  CHECK(group_of("head.beta.0.bias") == ParamGroup::beta_heads);
  CHECK_THROWS_AS(group_of("other"), std::invalid_argument);
}

TEST_CASE("build_model is deterministic per seed") {
  const ModelParams a = build_model(ModelConfig{}, 42);
  const ModelParams b = build_model(ModelConfig{}, 42);
  const ModelParams c = build_model(ModelConfig{}, 43);
  CHECK(a == b);
  CHECK_FALSE(a == c);

  for (const auto& l : a.base)
    for (float v : l.bias.data()) CHECK(v == 0.0f);
  for (const auto& h : a.gamma_heads) {
    for (float v : h.weight.data()) CHECK(v == 0.0f);
    for (float v : h.bias.data()) CHECK(v == 1.0f);
  }
  for (const auto& h : a.beta_heads)
    for (float v : h.bias.data()) CHECK(v == 0.0f);
}

TEST_CASE("fresh model emits identity modulation") {
  const ModelParams params = build_model(ModelConfig{}, 7);
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 3; ++trial) {
    const ImageRGB image = random_image(12, 10, rng);
    const auto trace = trace_forward(params, image);
    for (const auto& g : trace.modulation.gamma)
      for (float v : g.data()) CHECK(v == 1.0f);
    for (const auto& b : trace.modulation.beta)
      for (float v : b.data()) CHECK(v == 0.0f);
    CHECK(forward(params, image) == base_only_forward(params, image));
  }
}

TEST_CASE("zeroed head weights reduce to the base network") {
  ModelParams params = with_active_heads(build_model(ModelConfig{}, 8), 8);
  std::mt19937_64 rng(8);
  const ImageRGB image = random_image(9, 9, rng);
  CHECK_FALSE(forward(params, image) == base_only_forward(params, image));
  for (auto* heads : {&params.gamma_heads, &params.beta_heads})
    for (auto& h : *heads) h.weight.fill(0.0f);
  CHECK(forward(params, image) == base_only_forward(params, image));
}

TEST_CASE("condition vector") {
  const ModelParams params = build_model(ModelConfig{}, 9);
  const Tensor zero = condition_vector(params, ImageRGB(16, 16));
  REQUIRE(zero.size() == 32);
  for (float v : zero.data()) CHECK(v == 0.0f);

  std::mt19937_64 rng(9);
  const ImageRGB image = random_image(16, 20, rng);
  CHECK(condition_vector(params, image) == condition_vector(params, image));

  CHECK_THROWS_AS(condition_vector(params, ImageRGB(7, 16)), std::invalid_argument);
  CHECK_THROWS_AS(forward(params, ImageRGB(16, 4)), std::invalid_argument);
  CHECK_NOTHROW(condition_vector(params, ImageRGB(8, 8)));

  // Nearest-neighbour 2x upscale gives a different vector: recorded, not required.
  ImageRGB big(32, 40);
  for (std::size_t c = 0; c < 3; ++c)
    for (std::size_t y = 0; y < 32; ++y)
      for (std::size_t x = 0; x < 40; ++x) big.at(c, y, x) = image.at(c, y / 2, x / 2);
  MESSAGE("condition vector differs after 2x upscale: "
          << std::string(condition_vector(params, big) == condition_vector(params, image) ? "no"
                                                                                         : "yes"));
}

TEST_CASE("hand-crafted priors") {
  CHECK(hand_crafted_prior(constant_image(4, 4, 0.5f, 0.5f, 0.5f), PriorKind::brightness)[0] ==
        doctest::Approx(0.5).epsilon(1e-6));
  const Tensor means =
      hand_crafted_prior(constant_image(4, 4, 0.2f, 0.4f, 0.6f), PriorKind::avg_intensity);
  CHECK(means[0] == doctest::Approx(0.2).epsilon(1e-6));
  CHECK(means[1] == doctest::Approx(0.4).epsilon(1e-6));
  CHECK(means[2] == doctest::Approx(0.6).epsilon(1e-6));

  std::mt19937_64 rng(10);
  const Tensor hist = hand_crafted_prior(random_image(9, 7, rng), PriorKind::histogram);
  REQUIRE(hist.size() == 768);
  for (std::size_t c = 0; c < 3; ++c) {
    double s = 0.0;
    for (std::size_t i = 0; i < 256; ++i) s += hist[c * 256 + i];
    CHECK(s == doctest::Approx(1.0).epsilon(1e-5));
  }
  // A constant 0.5 image lands entirely in bin round(127.5) = 128.
  const Tensor gray = hand_crafted_prior(constant_image(2, 2, 0.5f, 0.5f, 0.5f), PriorKind::histogram);
  CHECK(gray[128] == doctest::Approx(1.0));
}

TEST_CASE("pixel independence under a fixed condition") {
  const ModelParams params = with_active_heads(build_model(ModelConfig{}, 11), 11);
  std::mt19937_64 rng(11);
  const Tensor condition = random_tensor<float>({32}, rng, 0.0, 1.0);
  const ImageRGB image = random_image(10, 12, rng);
  const ImageRGB out = forward_with_condition(params, condition, image);

  SUBCASE("spatial permutation") {
    const std::size_t n = image.pixel_count();
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    auto permute = [&](const ImageRGB& src) {
      ImageRGB dst(src.height(), src.width());
      for (std::size_t c = 0; c < 3; ++c)
        for (std::size_t p = 0; p < n; ++p) dst.channel(c)[p] = src.channel(c)[perm[p]];
      return dst;
    };
    const ImageRGB lhs = forward_with_condition(params, condition, permute(image));
    CHECK(max_abs_difference(lhs.tensor(), permute(out).tensor()) <= 1e-6);
  }

  SUBCASE("crop") {
    for (int trial = 0; trial < 5; ++trial) {
      std::uniform_int_distribution<std::size_t> hd(1, 10), wd(1, 12);
      const std::size_t h = hd(rng), w = wd(rng);
      std::uniform_int_distribution<std::size_t> yd(0, 10 - h), xd(0, 12 - w);
      const std::size_t y0 = yd(rng), x0 = xd(rng);
      const ImageRGB lhs = forward_with_condition(params, condition, crop(image, y0, x0, h, w));
      CHECK(max_abs_difference(lhs.tensor(), crop(out, y0, x0, h, w).tensor()) <= 1e-6);
    }
  }

  CHECK_THROWS_AS(forward_with_condition(params, Tensor({31}), image), std::invalid_argument);
}

TEST_CASE("forward output") {
  const ModelParams params = with_active_heads(build_model(ModelConfig{}, 12), 12);
  std::mt19937_64 rng(12);
  const ImageRGB image = random_image(13, 11, rng);
  const ImageRGB out = forward(params, image);
  CHECK(out.height() == 13);
  CHECK(out.width() == 11);
  for (float v : out.tensor().data()) {
    CHECK(v >= 0.0f);
    CHECK(v <= 1.0f);
  }
  CHECK(forward(params, image) == out);
}

TEST_CASE("trace_backward matches finite differences on a small model") {
  ModelConfig config;
  config.base_channels = 6;
  config.cond_channels = 4;
  config.cond_vector_dim = 5;
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const ModelParams64 theta = with_active_heads(build_model(config, seed), seed).cast<double>();
    std::mt19937_64 rng(seed + 100);
    const ImageRGB image = random_image(8, 8, rng);
    const auto trace = trace_forward(theta, image);
    const Tensor64 r = random_tensor<double>(trace.output.shape(), rng);
    const ModelParams64 analytic = trace_backward(theta, trace, r);

    std::vector<Tensor64> flat;
    theta.for_each_tensor([&](const std::string&, const Tensor64& t) { flat.push_back(t); });
    auto rebuild = [&](const std::vector<Tensor64>& p) {
      ModelParams64 m = theta;
      std::size_t i = 0;
      m.for_each_tensor([&](const std::string&, Tensor64& t) { t = p[i++]; });
      return m;
    };
    const auto numeric = nn::finite_difference_gradient(
        [&](const std::vector<Tensor64>& p) {
          const auto out = trace_forward(rebuild(p), image).output;
          double acc = 0.0;
          for (std::size_t i = 0; i < out.size(); ++i) acc += out[i] * r[i];
          return acc;
        },
        flat);
    std::size_t i = 0;
    analytic.for_each_tensor([&](const std::string& name, const Tensor64& g) {
      CAPTURE(name);
      CHECK(nn::max_relative_error(g, numeric[i++]) <= 1e-5);
    });
  }
}
