#include "csrnet/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "csrnet/classic_ops.hpp"

namespace csrnet::metrics {

namespace {

// sRGB primaries, D65 white.
constexpr double kRgbToXyz[3][3] = {{0.4124564, 0.3575761, 0.1804375},
                                    {0.2126729, 0.7151522, 0.0721750},
                                    {0.0193339, 0.1191920, 0.9503041}};

struct XyzToRgb {
  double m[3][3];
  XyzToRgb() {
    const auto& a = kRgbToXyz;
    const double det = a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1]) -
                       a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0]) +
                       a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0]);
    for (int r = 0; r < 3; ++r) {
      for (int c = 0; c < 3; ++c) {
        const int r1 = (c + 1) % 3, r2 = (c + 2) % 3;
        const int c1 = (r + 1) % 3, c2 = (r + 2) % 3;
        m[r][c] = (a[r1][c1] * a[r2][c2] - a[r1][c2] * a[r2][c1]) / det;
      }
    }
  }
};

const XyzToRgb& inverse_matrix() {
  static const XyzToRgb inv;
  return inv;
}

double white(int row) {
  return kRgbToXyz[row][0] + kRgbToXyz[row][1] + kRgbToXyz[row][2];
}

constexpr double kDelta = 6.0 / 29.0;

double srgb_to_linear(double v) {
  return v <= 0.04045 ? v / 12.92 : std::pow((v + 0.055) / 1.055, 2.4);
}

double linear_to_srgb(double v) {
  return v <= 0.0031308 ? 12.92 * v : 1.055 * std::pow(v, 1.0 / 2.4) - 0.055;
}

double lab_f(double t) {
  return t > kDelta * kDelta * kDelta ? std::cbrt(t)
                                      : t / (3.0 * kDelta * kDelta) + 4.0 / 29.0;
}

double lab_f_inverse(double t) {
  return t > kDelta ? t * t * t : 3.0 * kDelta * kDelta * (t - 4.0 / 29.0);
}

std::vector<double> luma_plane(const ImageRGB& image) {
  const Tensor y = retouch::luminance(image);
  return {y.data().begin(), y.data().end()};
}

}  // namespace

double psnr(const ImageRGB& a, const ImageRGB& b) {
  require_same_size(a, b, "psnr");
  double sum = 0.0;
  const auto x = a.tensor().data();
  const auto y = b.tensor().data();
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double d = static_cast<double>(x[i]) - static_cast<double>(y[i]);
    sum += d * d;
  }
  const double mse = sum / static_cast<double>(x.size());
  if (mse == 0.0) return kPsnrCap;
  return std::min(kPsnrCap, 10.0 * std::log10(1.0 / mse));
}

double ssim(const ImageRGB& a, const ImageRGB& b, const SsimOptions& options) {
  require_same_size(a, b, "ssim");
  const std::size_t h = a.height();
  const std::size_t w = a.width();
  std::size_t win = std::min({options.window, h, w});
  if (win % 2 == 0) --win;
  if (win == 0) throw std::invalid_argument("ssim: empty image");

  std::vector<double> kernel(win);
  const double centre = static_cast<double>(win / 2);
  double ksum = 0.0;
  for (std::size_t i = 0; i < win; ++i) {
    const double d = static_cast<double>(i) - centre;
    kernel[i] = std::exp(-d * d / (2.0 * options.sigma * options.sigma));
    ksum += kernel[i];
  }
  for (double& k : kernel) k /= ksum;

  const std::vector<double> x = luma_plane(a);
  const std::vector<double> y = luma_plane(b);
  const double c1 = (options.k1 * 1.0) * (options.k1 * 1.0);
  const double c2 = (options.k2 * 1.0) * (options.k2 * 1.0);

  double total = 0.0;
  std::size_t windows = 0;
  for (std::size_t top = 0; top + win <= h; ++top) {
    for (std::size_t left = 0; left + win <= w; ++left) {
      double mx = 0, my = 0, sxx = 0, syy = 0, sxy = 0;
      for (std::size_t i = 0; i < win; ++i) {
        for (std::size_t j = 0; j < win; ++j) {
          const double k = kernel[i] * kernel[j];
          const std::size_t idx = (top + i) * w + left + j;
          mx += k * x[idx];
          my += k * y[idx];
          sxx += k * x[idx] * x[idx];
          syy += k * y[idx] * y[idx];
          sxy += k * (x[idx] * y[idx]);
        }
      }
      const double vx = sxx - mx * mx;
      const double vy = syy - my * my;
      const double cov = sxy - mx * my;
      total += ((2 * (mx * my) + c1) * (2 * cov + c2)) /
               ((mx * mx + my * my + c1) * (vx + vy + c2));
      ++windows;
    }
  }
  return total / static_cast<double>(windows);
}

std::array<double, 3> srgb_to_lab(double r, double g, double b) {
  const double lin[3] = {srgb_to_linear(r), srgb_to_linear(g), srgb_to_linear(b)};
  double f[3];
  for (int row = 0; row < 3; ++row) {
    const double v = kRgbToXyz[row][0] * lin[0] + kRgbToXyz[row][1] * lin[1] +
                     kRgbToXyz[row][2] * lin[2];
    f[row] = lab_f(v / white(row));
  }
  return {116.0 * f[1] - 16.0, 500.0 * (f[0] - f[1]), 200.0 * (f[1] - f[2])};
}

std::array<double, 3> lab_to_srgb(double l, double a, double b) {
  const double fy = (l + 16.0) / 116.0;
  const double fx = fy + a / 500.0;
  const double fz = fy - b / 200.0;
  const double xyz[3] = {white(0) * lab_f_inverse(fx), white(1) * lab_f_inverse(fy),
                         white(2) * lab_f_inverse(fz)};
  const auto& m = inverse_matrix().m;
  std::array<double, 3> rgb{};
  for (int row = 0; row < 3; ++row) {
    rgb[row] = linear_to_srgb(m[row][0] * xyz[0] + m[row][1] * xyz[1] + m[row][2] * xyz[2]);
  }
  return rgb;
}

Tensor64 rgb_to_lab(const ImageRGB& image) {
  Tensor64 out({3, image.height(), image.width()});
  const std::size_t n = image.pixel_count();
  for (std::size_t i = 0; i < n; ++i) {
    const auto lab = srgb_to_lab(image.channel(0)[i], image.channel(1)[i],
                                 image.channel(2)[i]);
    for (std::size_t c = 0; c < 3; ++c) out[c * n + i] = lab[c];
  }
  return out;
}

double lab_l2(const ImageRGB& a, const ImageRGB& b) {
  require_same_size(a, b, "lab_l2");
  const Tensor64 la = rgb_to_lab(a);
  const Tensor64 lb = rgb_to_lab(b);
  const std::size_t n = a.pixel_count();
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double sq = 0.0;
    for (std::size_t c = 0; c < 3; ++c) {
      const double d = la[c * n + i] - lb[c * n + i];
      sq += d * d;
    }
    total += std::sqrt(sq);
  }
  return total / static_cast<double>(n);
}

MetricReport evaluate(const ImageRGB& a, const ImageRGB& b) {
  return {psnr(a, b), ssim(a, b), lab_l2(a, b)};
}

}  // namespace csrnet::metrics
