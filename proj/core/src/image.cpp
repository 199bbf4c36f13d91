#include "csrnet/image.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace csrnet {

ImageRGB::ImageRGB(Tensor pixels) : pixels_(std::move(pixels)) {
  if (pixels_.rank() != 3 || pixels_.dim(0) != 3) {
    throw std::invalid_argument("an RGB image must be a 3 x H x W tensor, got " +
                                to_string(pixels_.shape()));
  }
}

std::span<float> ImageRGB::channel(std::size_t c) {
  return pixels_.data().subspan(c * pixel_count(), pixel_count());
}

std::span<const float> ImageRGB::channel(std::size_t c) const {
  return pixels_.data().subspan(c * pixel_count(), pixel_count());
}

ImageRGB from_8bit(const Image8& image) {
  if (image.height == 0 || image.width == 0 ||
      image.rgb.size() != image.height * image.width * 3) {
    throw std::invalid_argument("malformed 8-bit image buffer");
  }
  ImageRGB out(image.height, image.width);
  for (std::size_t y = 0; y < image.height; ++y) {
    for (std::size_t x = 0; x < image.width; ++x) {
      const std::size_t base = (y * image.width + x) * 3;
      for (std::size_t c = 0; c < 3; ++c) {
        out.at(c, y, x) = static_cast<float>(image.rgb[base + c]) / 255.0f;
      }
    }
  }
  return out;
}

std::uint8_t quantize(float value) {
  const float v = std::isnan(value) ? 0.0f : std::clamp(value, 0.0f, 1.0f);
  // lround rounds halfway cases away from zero.
  return static_cast<std::uint8_t>(std::lround(static_cast<double>(v) * 255.0));
}

Image8 to_8bit(const ImageRGB& image) {
  Image8 out{image.height(), image.width(),
             std::vector<std::uint8_t>(image.pixel_count() * 3)};
  for (std::size_t y = 0; y < out.height; ++y) {
    for (std::size_t x = 0; x < out.width; ++x) {
      const std::size_t base = (y * out.width + x) * 3;
      for (std::size_t c = 0; c < 3; ++c) {
        out.rgb[base + c] = quantize(image.at(c, y, x));
      }
    }
  }
  return out;
}

ImageRGB clamp01(ImageRGB image) {
  for (float& v : image.tensor().data()) v = std::clamp(v, 0.0f, 1.0f);
  return image;
}

void require_same_size(const ImageRGB& a, const ImageRGB& b, const char* what) {
  if (!a.same_size(b)) {
    throw std::invalid_argument(
        std::string(what) + ": image sizes differ (" + std::to_string(a.height()) +
        "x" + std::to_string(a.width()) + " vs " + std::to_string(b.height()) +
        "x" + std::to_string(b.width()) + ")");
  }
}

}  // namespace csrnet
