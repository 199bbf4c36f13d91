#pragma once

#include "csrnet/image.hpp"

namespace csrnet {

/// Mixing coefficient in [0, 1]; construction rejects anything else.
class BlendAlpha {
 public:
  explicit BlendAlpha(double value);
  double value() const noexcept { return value_; }

 private:
  double value_;
};

/// Per-pixel alpha * first + (1 - alpha) * second. alpha = 1 returns `first`
/// exactly and alpha = 0 returns `second` exactly.
ImageRGB blend(const ImageRGB& first, const ImageRGB& second, BlendAlpha alpha);

/// Strength control between an input and its retouched version: alpha = 0
/// gives the full retouch, alpha = 1 the untouched input.
ImageRGB strength_control(const ImageRGB& input, const ImageRGB& retouched,
                          BlendAlpha alpha);

}  // namespace csrnet
