#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "csrnet/classic_ops.hpp"
#include "csrnet/image.hpp"
#include "csrnet/tensor.hpp"
#include "csrnet/training.hpp"

namespace csrnet::testing {

template <typename T>
BasicTensor<T> random_tensor(const Shape& shape, std::mt19937_64& rng, double lo = -1.0,
                             double hi = 1.0) {
  std::uniform_real_distribution<double> dist(lo, hi);
  BasicTensor<T> t(shape);
  for (T& v : t.data()) v = static_cast<T>(dist(rng));
  return t;
}

inline ImageRGB random_image(std::size_t h, std::size_t w, std::mt19937_64& rng,
                             double lo = 0.0, double hi = 1.0) {
  return ImageRGB(random_tensor<float>({3, h, w}, rng, lo, hi));
}

inline ImageRGB constant_image(std::size_t h, std::size_t w, float r, float g, float b) {
  ImageRGB image(h, w);
  const float rgb[3] = {r, g, b};
  for (std::size_t c = 0; c < 3; ++c) std::fill(image.channel(c).begin(), image.channel(c).end(), rgb[c]);
  return image;
}

/// Smooth colour field with values in [0.05, 0.95].
inline ImageRGB smooth_image(std::size_t size, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  ImageRGB image(size, size);
  const double base[3] = {0.3 + 0.4 * unit(rng), 0.3 + 0.4 * unit(rng), 0.3 + 0.4 * unit(rng)};
  const double fx = 6.0 * unit(rng);
  const double fy = 6.0 * unit(rng);
  const double n = static_cast<double>(size);
  for (std::size_t c = 0; c < 3; ++c) {
    for (std::size_t y = 0; y < size; ++y) {
      for (std::size_t x = 0; x < size; ++x) {
        const double v = base[c] + 0.2 * std::sin(fx * x / n + c) * std::cos(fy * y / n + 2.0 * c);
        image.at(c, y, x) = static_cast<float>(std::clamp(v, 0.05, 0.95));
      }
    }
  }
  return image;
}

/// Pairs whose targets are clean images and whose inputs are those images
/// after a random brightness then contrast change; the network has to learn
/// the inverse adjustment.
inline std::vector<train::TrainingPair> distortion_pairs(std::size_t count, std::size_t size,
                                                         std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<train::TrainingPair> pairs;
  for (std::size_t k = 0; k < count; ++k) {
    ImageRGB clean = smooth_image(size, rng);
    const double brightness = 0.6 + 0.6 * unit(rng);
    const double contrast = 0.6 + 0.8 * unit(rng);
    ImageRGB distorted = retouch::adjust_contrast(
        retouch::adjust_brightness(clean, brightness), contrast);
    pairs.push_back({std::move(distorted), std::move(clean), "pair" + std::to_string(k)});
  }
  return pairs;
}

/// Same inputs, targets produced by `style` applied to the clean image.
template <typename Style>
std::vector<train::TrainingPair> styled_pairs(std::size_t count, std::size_t size,
                                              std::uint64_t seed, Style style) {
  std::mt19937_64 rng(seed);
  std::vector<train::TrainingPair> pairs;
  for (std::size_t k = 0; k < count; ++k) {
    ImageRGB input = smooth_image(size, rng);
    ImageRGB target = style(input);
    pairs.push_back({std::move(input), std::move(target), "styled" + std::to_string(k)});
  }
  return pairs;
}

/// Directory under the system temp path, removed on destruction.
class TempDir {
 public:
  TempDir() {
    static std::atomic<unsigned> counter{0};
    const auto stamp = std::chrono::steady_clock::now().time_since_epoch().count();
    path_ = std::filesystem::temp_directory_path() /
            ("csrnet-test-" + std::to_string(stamp) + "-" + std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

}  // namespace csrnet::testing
