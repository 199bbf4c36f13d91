#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "csrnet/tensor.hpp"

namespace csrnet {

/// RGB image stored channel-major as a 3 x H x W float tensor. Decoded images
/// hold values in [0, 1]; intermediate results may leave that range.
class ImageRGB {
 public:
  ImageRGB() = default;
  ImageRGB(std::size_t height, std::size_t width, float fill = 0.0f)
      : pixels_({3, height, width}, fill) {}
  explicit ImageRGB(Tensor pixels);

  std::size_t height() const { return pixels_.dim(1); }
  std::size_t width() const { return pixels_.dim(2); }
  std::size_t pixel_count() const { return height() * width(); }
  bool empty() const { return pixels_.empty(); }

  float& at(std::size_t c, std::size_t y, std::size_t x) { return pixels_.at(c, y, x); }
  float at(std::size_t c, std::size_t y, std::size_t x) const { return pixels_.at(c, y, x); }

  std::span<float> channel(std::size_t c);
  std::span<const float> channel(std::size_t c) const;

  const Tensor& tensor() const noexcept { return pixels_; }
  Tensor& tensor() noexcept { return pixels_; }

  bool same_size(const ImageRGB& other) const {
    return height() == other.height() && width() == other.width();
  }

  friend bool operator==(const ImageRGB& a, const ImageRGB& b) {
    return a.pixels_ == b.pixels_;
  }

 private:
  Tensor pixels_;
};

/// 8-bit interleaved RGB, the interchange form for files and the service.
struct Image8 {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<std::uint8_t> rgb;  // row-major, 3 bytes per pixel

  friend bool operator==(const Image8&, const Image8&) = default;
};

ImageRGB from_8bit(const Image8& image);

/// Clamps to [0, 1] and rounds v * 255 half away from zero.
Image8 to_8bit(const ImageRGB& image);

std::uint8_t quantize(float value);

ImageRGB clamp01(ImageRGB image);

/// Throws std::invalid_argument unless `a` and `b` have equal dimensions.
void require_same_size(const ImageRGB& a, const ImageRGB& b, const char* what);

}  // namespace csrnet
