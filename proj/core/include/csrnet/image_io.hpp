#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <vector>

#include "csrnet/image.hpp"

namespace csrnet {

/// Raised when a file cannot be read, written or decoded.
class ImageIoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Larger images are refused before any pixel buffer is allocated.
inline constexpr std::size_t kMaxDecodedPixels = std::size_t{1} << 26;

/// Decodes any PNG into 8-bit RGB (alpha dropped, gray expanded).
Image8 decode_png(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> encode_png(const Image8& image);

Image8 read_png(const std::filesystem::path& path);
void write_png(const std::filesystem::path& path, const Image8& image);

inline ImageRGB load_image(const std::filesystem::path& path) {
  return from_8bit(read_png(path));
}
inline void save_image(const std::filesystem::path& path, const ImageRGB& image) {
  write_png(path, to_8bit(image));
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path,
                std::span<const std::uint8_t> bytes);

}  // namespace csrnet
