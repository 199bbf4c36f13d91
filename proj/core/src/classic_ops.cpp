#include "csrnet/classic_ops.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>
#include <string>

namespace csrnet::retouch {

namespace {

float finish(double value, Clamp clamp) {
  if (clamp == Clamp::yes) value = std::clamp(value, 0.0, 1.0);
  return static_cast<float>(value);
}

double luma_at(const ImageRGB& image, std::size_t i) {
  return kLumaR * image.channel(0)[i] + kLumaG * image.channel(1)[i] +
         kLumaB * image.channel(2)[i];
}

void require_finite(double value, const char* what) {
  if (!std::isfinite(value)) {
    throw std::invalid_argument(std::string(what) + " must be finite");
  }
}

std::size_t pixels_for(std::size_t rows, std::size_t cols, std::size_t channels) {
  if (rows == 0 || cols == 0) {
    throw std::invalid_argument("MLP construction needs a non-empty image size");
  }
  const std::size_t inputs = rows * cols * channels;
  if (inputs > kMaxMaterializedInputs) {
    throw std::invalid_argument(
        "MLP construction over " + std::to_string(inputs) +
        " inputs exceeds the materialization limit of " +
        std::to_string(kMaxMaterializedInputs) +
        "; verify larger images with the direct operation on 8x8 tiles instead");
  }
  return rows * cols;
}

}  // namespace

Tensor luminance(const ImageRGB& image) {
  Tensor out({image.height(), image.width()});
  for (std::size_t i = 0; i < image.pixel_count(); ++i) {
    out[i] = static_cast<float>(luma_at(image, i));
  }
  return out;
}

std::array<double, 3> channel_means(const ImageRGB& image) {
  std::array<double, 3> means{};
  for (std::size_t c = 0; c < 3; ++c) {
    double acc = 0.0;
    for (float v : image.channel(c)) acc += v;
    means[c] = acc / static_cast<double>(image.pixel_count());
  }
  return means;
}

ImageRGB adjust_brightness(const ImageRGB& image, double alpha, Clamp clamp) {
  require_finite(alpha, "brightness alpha");
  if (alpha < 0.0) {
    throw std::invalid_argument("brightness alpha must be non-negative, got " +
                                std::to_string(alpha));
  }
  ImageRGB out = image;
  for (float& v : out.tensor().data()) v = finish(alpha * v, clamp);
  return out;
}

ImageRGB adjust_contrast(const ImageRGB& image, double alpha, Clamp clamp) {
  return adjust_contrast(image, alpha, channel_means(image), clamp);
}

ImageRGB adjust_contrast(const ImageRGB& image, double alpha,
                         const std::array<double, 3>& means, Clamp clamp) {
  require_finite(alpha, "contrast alpha");
  ImageRGB out = image;
  for (std::size_t c = 0; c < 3; ++c) {
    const double offset = (1.0 - alpha) * means[c];
    for (float& v : out.channel(c)) v = finish(alpha * v + offset, clamp);
  }
  return out;
}

std::array<double, 3> gray_world_gains(const ImageRGB& image) {
  const auto means = channel_means(image);
  const double luma_mean = kLumaR * means[0] + kLumaG * means[1] + kLumaB * means[2];
  std::array<double, 3> gains{1.0, 1.0, 1.0};
  for (std::size_t c = 0; c < 3; ++c) {
    if (means[c] >= 1e-6) gains[c] = luma_mean / means[c];
  }
  return gains;
}

ImageRGB apply_channel_gains(const ImageRGB& image,
                             const std::array<double, 3>& gains, Clamp clamp) {
  ImageRGB out = image;
  for (std::size_t c = 0; c < 3; ++c) {
    require_finite(gains[c], "channel gain");
    for (float& v : out.channel(c)) v = finish(gains[c] * v, clamp);
  }
  return out;
}

ImageRGB white_balance_grayworld(const ImageRGB& image, Clamp clamp) {
  return apply_channel_gains(image, gray_world_gains(image), clamp);
}

ImageRGB adjust_saturation(const ImageRGB& image, double s, Clamp clamp) {
  require_finite(s, "saturation strength");
  ImageRGB out = image;
  for (std::size_t i = 0; i < image.pixel_count(); ++i) {
    const double y = (1.0 - s) * luma_at(image, i);
    for (std::size_t c = 0; c < 3; ++c) {
      out.channel(c)[i] = finish(s * image.channel(c)[i] + y, clamp);
    }
  }
  return out;
}

ImageRGB tone_map_gamma(const ImageRGB& image, double g) {
  require_finite(g, "tone-map exponent");
  if (g <= 0.0) {
    throw std::invalid_argument("tone-map exponent must be positive, got " +
                                std::to_string(g));
  }
  ImageRGB out = image;
  for (float& v : out.tensor().data()) {
    v = static_cast<float>(std::pow(std::clamp(static_cast<double>(v), 0.0, 1.0), g));
  }
  return out;
}

// ---------------------------------------------------------------------------

std::size_t MlpSpec::input_dim() const {
  if (layers.empty()) throw std::logic_error("MLP has no layers");
  return layers.front().weight.dim(1);
}

std::size_t MlpSpec::output_dim() const {
  if (layers.empty()) throw std::logic_error("MLP has no layers");
  return layers.back().weight.dim(0);
}

void MlpSpec::validate() const {
  if (layers.empty()) throw std::invalid_argument("MLP has no layers");
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const auto& layer = layers[i];
    if (layer.weight.rank() != 2 || layer.bias.rank() != 1 ||
        layer.bias.dim(0) != layer.weight.dim(0)) {
      throw std::invalid_argument("MLP layer " + std::to_string(i) +
                                  " has inconsistent weight/bias shapes");
    }
    if (i > 0 && layers[i - 1].weight.dim(0) != layer.weight.dim(1)) {
      throw std::invalid_argument("MLP layer " + std::to_string(i) +
                                  " does not chain with its predecessor");
    }
    if (!layer.weight.all_finite() || !layer.bias.all_finite()) {
      throw std::invalid_argument("MLP layer " + std::to_string(i) +
                                  " has non-finite entries");
    }
  }
}

std::vector<double> MlpSpec::evaluate(const std::vector<double>& input) const {
  if (input.size() != input_dim()) {
    throw std::invalid_argument("MLP expects " + std::to_string(input_dim()) +
                                " inputs, got " + std::to_string(input.size()));
  }
  std::vector<double> x = input;
  for (const auto& layer : layers) {
    const std::size_t rows = layer.weight.dim(0);
    const std::size_t cols = layer.weight.dim(1);
    std::vector<double> y(rows);
    for (std::size_t r = 0; r < rows; ++r) {
      const double* w = layer.weight.raw() + r * cols;
      double acc = layer.bias[r];
      for (std::size_t c = 0; c < cols; ++c) {
        if (w[c] != 0.0) acc += w[c] * x[c];
      }
      y[r] = layer.activation == Activation::relu ? std::max(acc, 0.0) : acc;
    }
    x = std::move(y);
  }
  return x;
}

MlpSpec build_brightness_mlp(double alpha, std::size_t rows, std::size_t cols) {
  require_finite(alpha, "brightness alpha");
  const std::size_t n = pixels_for(rows, cols, 1);
  MlpLayer layer{Tensor64({n, n}), Tensor64({n}), Activation::identity};
  for (std::size_t i = 0; i < n; ++i) layer.weight[i * n + i] = alpha;
  return MlpSpec{{std::move(layer)}};
}

MlpSpec build_contrast_mlp(double alpha, std::size_t rows, std::size_t cols) {
  require_finite(alpha, "contrast alpha");
  const std::size_t n = pixels_for(rows, cols, 1);
  const std::size_t hidden = n + 1;

  // First layer [A, B]: alpha on the diagonal, plus a mean unit.
  MlpLayer first{Tensor64({hidden, n}), Tensor64({hidden}), Activation::identity};
  for (std::size_t i = 0; i < n; ++i) first.weight[i * n + i] = alpha;
  const double inv_n = 1.0 / static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) first.weight[n * n + i] = inv_n;

  // Second layer [C; D]: identity on the pixel units, (1 - alpha) from the
  // mean unit to every output.
  MlpLayer second{Tensor64({n, hidden}), Tensor64({n}), Activation::identity};
  for (std::size_t j = 0; j < n; ++j) {
    second.weight[j * hidden + j] = 1.0;
    second.weight[j * hidden + n] = 1.0 - alpha;
  }
  return MlpSpec{{std::move(first), std::move(second)}};
}

MlpSpec build_white_balance_mlp(const std::array<double, 3>& gains,
                                std::size_t rows, std::size_t cols) {
  const std::size_t n = pixels_for(rows, cols, 3);
  const std::size_t dim = 3 * n;
  MlpLayer layer{Tensor64({dim, dim}), Tensor64({dim}), Activation::identity};
  for (std::size_t c = 0; c < 3; ++c) {
    require_finite(gains[c], "channel gain");
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t k = c * n + i;
      layer.weight[k * dim + k] = gains[c];
    }
  }
  return MlpSpec{{std::move(layer)}};
}

MlpSpec build_saturation_mlp(double s, std::size_t rows, std::size_t cols) {
  require_finite(s, "saturation strength");
  const std::size_t n = pixels_for(rows, cols, 3);
  const std::size_t dim = 3 * n;
  const std::array<double, 3> luma{kLumaR, kLumaG, kLumaB};
  MlpLayer layer{Tensor64({dim, dim}), Tensor64({dim}), Activation::identity};
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t out_c = 0; out_c < 3; ++out_c) {
      const std::size_t row = out_c * n + i;
      for (std::size_t in_c = 0; in_c < 3; ++in_c) {
        const std::size_t col = in_c * n + i;
        layer.weight[row * dim + col] =
            (out_c == in_c ? s : 0.0) + (1.0 - s) * luma[in_c];
      }
    }
  }
  return MlpSpec{{std::move(layer)}};
}

ImageRGB apply_mlp(const MlpSpec& mlp, const ImageRGB& image) {
  const std::size_t n = image.pixel_count();
  ImageRGB out(image.height(), image.width());
  if (mlp.input_dim() == n && mlp.output_dim() == n) {
    for (std::size_t c = 0; c < 3; ++c) {
      const auto src = image.channel(c);
      const auto y = mlp.evaluate(std::vector<double>(src.begin(), src.end()));
      std::transform(y.begin(), y.end(), out.channel(c).begin(),
                     [](double v) { return static_cast<float>(v); });
    }
    return out;
  }
  if (mlp.input_dim() == 3 * n && mlp.output_dim() == 3 * n) {
    const auto src = image.tensor().data();
    const auto y = mlp.evaluate(std::vector<double>(src.begin(), src.end()));
    std::transform(y.begin(), y.end(), out.tensor().data().begin(),
                   [](double v) { return static_cast<float>(v); });
    return out;
  }
  throw std::invalid_argument("MLP of input size " + std::to_string(mlp.input_dim()) +
                              " does not fit a " + std::to_string(image.height()) +
                              "x" + std::to_string(image.width()) + " image");
}

EquivalenceReport verify_mlp_equivalence(const DirectOp& direct,
                                         const MlpBuilder& build,
                                         const EquivalenceOptions& options) {
  EquivalenceReport report;
  report.tolerance = options.tolerance;
  std::mt19937_64 rng(options.seed);
  std::uniform_real_distribution<float> unit(0.0f, 1.0f);

  for (std::size_t t = 0; t < options.trials; ++t) {
    ImageRGB image(options.rows, options.cols);
    for (float& v : image.tensor().data()) v = unit(rng);

    const ImageRGB expected = direct(image);
    const MlpSpec mlp = build(image);
    const std::size_t n = image.pixel_count();

    // Evaluate in double and compare before any float rounding of the
    // network output.
    std::vector<double> got;
    if (mlp.input_dim() == n) {
      for (std::size_t c = 0; c < 3; ++c) {
        const auto src = image.channel(c);
        auto y = mlp.evaluate(std::vector<double>(src.begin(), src.end()));
        got.insert(got.end(), y.begin(), y.end());
      }
    } else {
      const auto src = image.tensor().data();
      got = mlp.evaluate(std::vector<double>(src.begin(), src.end()));
    }
    if (got.size() != expected.tensor().size()) {
      throw std::invalid_argument("MLP output size does not match the direct op");
    }
    for (std::size_t i = 0; i < got.size(); ++i) {
      report.max_abs_deviation =
          std::max(report.max_abs_deviation,
                   std::abs(got[i] - static_cast<double>(expected.tensor()[i])));
    }
    ++report.trials;
  }
  report.passed = report.max_abs_deviation <= report.tolerance;
  return report;
}

EquivalenceReport verify_mlp_equivalence(const DirectOp& direct,
                                         const MlpSpec& mlp,
                                         const EquivalenceOptions& options) {
  return verify_mlp_equivalence(
      direct, [&mlp](const ImageRGB&) { return mlp; }, options);
}

ToneCurveFit fit_tone_curve_mlp(double g, std::size_t hidden,
                                std::size_t grid_points) {
  require_finite(g, "tone-map exponent");
  if (g <= 0.0) throw std::invalid_argument("tone-map exponent must be positive");
  if (hidden == 0 || grid_points < 2) {
    throw std::invalid_argument("tone curve fit needs hidden >= 1 and >= 2 grid points");
  }
  const auto curve = [g](double x) { return std::pow(x, g); };

  // For f = x^g, sqrt|f''| integrates to a multiple of x^(g/2).
  std::vector<double> knots(hidden + 1);
  for (std::size_t i = 0; i <= hidden; ++i) {
    knots[i] = std::pow(static_cast<double>(i) / static_cast<double>(hidden), 2.0 / g);
  }

  MlpLayer first{Tensor64({hidden, 1}), Tensor64({hidden}), Activation::relu};
  MlpLayer second{Tensor64({1, hidden}), Tensor64({1}), Activation::identity};
  double previous_slope = 0.0;
  for (std::size_t i = 0; i < hidden; ++i) {
    first.weight[i] = 1.0;
    first.bias[i] = -knots[i];
    const double slope =
        (curve(knots[i + 1]) - curve(knots[i])) / (knots[i + 1] - knots[i]);
    second.weight[i] = slope - previous_slope;
    previous_slope = slope;
  }
  second.bias[0] = curve(0.0);

  ToneCurveFit fit{g, MlpSpec{{std::move(first), std::move(second)}}, grid_points, 0.0};

  auto band = [&] {
    double lo = 0.0;
    double hi = 0.0;
    for (std::size_t k = 0; k < grid_points; ++k) {
      const double x = static_cast<double>(k) / static_cast<double>(grid_points - 1);
      const double err = fit.mlp.evaluate({x})[0] - curve(x);
      lo = std::min(lo, err);
      hi = std::max(hi, err);
    }
    return std::pair{lo, hi};
  };
  const auto [lo, hi] = band();
  fit.mlp.layers.back().bias[0] -= 0.5 * (lo + hi);
  const auto [lo2, hi2] = band();
  fit.max_error = std::max(-lo2, hi2);
  return fit;
}

}  // namespace csrnet::retouch
