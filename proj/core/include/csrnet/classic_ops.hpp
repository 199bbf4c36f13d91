#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "csrnet/image.hpp"
#include "csrnet/tensor.hpp"

/// Pixel-independent global retouching operations and explicit multi-layer
/// perceptrons that compute the same maps.
namespace csrnet::retouch {

inline constexpr double kLumaR = 0.299;
inline constexpr double kLumaG = 0.587;
inline constexpr double kLumaB = 0.114;

enum class Clamp { yes, no };

/// Per-pixel luma map (H x W).
Tensor luminance(const ImageRGB& image);

std::array<double, 3> channel_means(const ImageRGB& image);

/// out = alpha * in. alpha must be non-negative.
ImageRGB adjust_brightness(const ImageRGB& image, double alpha,
                           Clamp clamp = Clamp::yes);

/// Per channel: out = alpha * in + (1 - alpha) * mean(channel).
ImageRGB adjust_contrast(const ImageRGB& image, double alpha,
                         Clamp clamp = Clamp::yes);

/// Contrast against externally supplied channel means.
ImageRGB adjust_contrast(const ImageRGB& image, double alpha,
                         const std::array<double, 3>& means,
                         Clamp clamp = Clamp::yes);

/// Gray-world von Kries gains mean(luma) / mean(channel); channels whose mean
/// is below 1e-6 get gain 1.
std::array<double, 3> gray_world_gains(const ImageRGB& image);

ImageRGB apply_channel_gains(const ImageRGB& image,
                             const std::array<double, 3>& gains,
                             Clamp clamp = Clamp::yes);

ImageRGB white_balance_grayworld(const ImageRGB& image, Clamp clamp = Clamp::yes);

/// out = s * in + (1 - s) * luma, with luma broadcast to all channels.
ImageRGB adjust_saturation(const ImageRGB& image, double s,
                           Clamp clamp = Clamp::yes);

/// out = in^g on inputs clamped to [0, 1]; g must be positive.
ImageRGB tone_map_gamma(const ImageRGB& image, double g);

// ---------------------------------------------------------------------------
// MLP constructions

enum class Activation { identity, relu };

struct MlpLayer {
  Tensor64 weight;  // outputs x inputs
  Tensor64 bias;    // outputs
  Activation activation = Activation::identity;
};

struct MlpSpec {
  std::vector<MlpLayer> layers;

  std::size_t input_dim() const;
  std::size_t output_dim() const;

  /// Throws unless layer dimensions chain and every entry is finite.
  void validate() const;

  std::vector<double> evaluate(const std::vector<double>& input) const;
};

/// Largest flattened input a materialized construction accepts.
inline constexpr std::size_t kMaxMaterializedInputs = 4096;

/// Single-channel M*N brightness network: W = diag(alpha), b = 0.
MlpSpec build_brightness_mlp(double alpha, std::size_t rows, std::size_t cols);

/// Single-channel contrast network with M*N + 1 hidden units. The first M*N
/// hidden units carry alpha * x, the last one carries the image mean; the
/// output layer adds (1 - alpha) times that mean to every pixel.
MlpSpec build_contrast_mlp(double alpha, std::size_t rows, std::size_t cols);

/// Diagonal network over the channel-major RGB vector (3*M*N) with one gain
/// per channel block.
MlpSpec build_white_balance_mlp(const std::array<double, 3>& gains,
                                std::size_t rows, std::size_t cols);

/// Block-diagonal network applying s*I + (1-s) * 1 * luma^T to every pixel.
MlpSpec build_saturation_mlp(double s, std::size_t rows, std::size_t cols);

/// Applies an MLP to an image. A network over M*N inputs is applied to each
/// channel separately; one over 3*M*N inputs sees the whole channel-major
/// image. No clamping.
ImageRGB apply_mlp(const MlpSpec& mlp, const ImageRGB& image);

struct EquivalenceReport {
  std::size_t trials = 0;
  double max_abs_deviation = 0.0;
  double tolerance = 0.0;
  bool passed = false;
};

struct EquivalenceOptions {
  std::size_t trials = 100;
  double tolerance = 1e-6;
  std::size_t rows = 8;
  std::size_t cols = 8;
  std::uint64_t seed = 1;
};

using DirectOp = std::function<ImageRGB(const ImageRGB&)>;
/// Builds the network for a particular image; constructions that depend on
/// global statistics read them here.
using MlpBuilder = std::function<MlpSpec(const ImageRGB&)>;

/// Evaluates the direct operation (unclamped) and the network on random
/// images and reports the largest absolute deviation.
EquivalenceReport verify_mlp_equivalence(const DirectOp& direct,
                                         const MlpBuilder& build,
                                         const EquivalenceOptions& options = {});

EquivalenceReport verify_mlp_equivalence(const DirectOp& direct,
                                         const MlpSpec& mlp,
                                         const EquivalenceOptions& options = {});

/// A 1 -> hidden -> 1 ReLU network approximating x^g on [0, 1].
struct ToneCurveFit {
  double exponent = 1.0;
  MlpSpec mlp;
  std::size_t grid_points = 0;
  double max_error = 0.0;
};

/// Fits x^g with `hidden` ReLU units: breakpoints equidistribute the
/// integral of sqrt(f''), output weights interpolate the curve at the
/// breakpoints, and the output bias centres the error band measured on a
/// uniform grid of `grid_points` samples.
ToneCurveFit fit_tone_curve_mlp(double g, std::size_t hidden = 16,
                                std::size_t grid_points = 1024);

}  // namespace csrnet::retouch
