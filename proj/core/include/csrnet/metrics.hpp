#pragma once

#include <array>

#include "csrnet/image.hpp"
#include "csrnet/tensor.hpp"

namespace csrnet::metrics {

/// Reported when two images are identical.
inline constexpr double kPsnrCap = 100.0;

struct MetricReport {
  double psnr = 0.0;
  double ssim = 0.0;
  double lab_l2 = 0.0;
};

/// 10 log10(1 / MSE) over all channels, peak value 1.
double psnr(const ImageRGB& a, const ImageRGB& b);

struct SsimOptions {
  std::size_t window = 11;  // odd; shrunk to fit small images
  double sigma = 1.5;
  double k1 = 0.01;
  double k2 = 0.03;
};

/// Mean SSIM of the luma channels over all fully-contained Gaussian windows.
double ssim(const ImageRGB& a, const ImageRGB& b, const SsimOptions& options = {});

/// sRGB (D65) to CIE L*a*b*; result is 3 x H x W (L, a, b planes).
Tensor64 rgb_to_lab(const ImageRGB& image);
std::array<double, 3> srgb_to_lab(double r, double g, double b);
std::array<double, 3> lab_to_srgb(double l, double a, double b);

/// Mean per-pixel Euclidean distance in L*a*b*.
double lab_l2(const ImageRGB& a, const ImageRGB& b);

MetricReport evaluate(const ImageRGB& a, const ImageRGB& b);

}  // namespace csrnet::metrics
