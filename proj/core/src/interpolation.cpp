#include "csrnet/interpolation.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace csrnet {

BlendAlpha::BlendAlpha(double value) : value_(value) {
  if (!(value >= 0.0 && value <= 1.0)) {
    throw std::invalid_argument("alpha must lie in [0, 1], got " + std::to_string(value));
  }
}

ImageRGB blend(const ImageRGB& first, const ImageRGB& second, BlendAlpha alpha) {
  require_same_size(first, second, "blend");
  const double a = alpha.value();
  if (a == 1.0) return first;
  if (a == 0.0) return second;
  // The larger weight is taken as given and the smaller one derived from it;
  // both subtractions are then exact, so swapping the inputs together with
  // alpha -> 1 - alpha reproduces the same weights.
  const double wy = 1.0 - a;
  const double wx = a >= 0.5 ? a : 1.0 - wy;
  ImageRGB out(first.height(), first.width());
  const auto x = first.tensor().data();
  const auto y = second.tensor().data();
  auto o = out.tensor().data();
  for (std::size_t i = 0; i < o.size(); ++i) {
    const double v = wx * x[i] + wy * y[i];
    // Keep rounding from stepping outside the segment between the inputs.
    o[i] = static_cast<float>(std::clamp(v, static_cast<double>(std::min(x[i], y[i])),
                                         static_cast<double>(std::max(x[i], y[i]))));
  }
  return out;
}

ImageRGB strength_control(const ImageRGB& input, const ImageRGB& retouched,
                          BlendAlpha alpha) {
  return blend(input, retouched, alpha);
}

}  // namespace csrnet
