#include "csrnet/image_io.hpp"

#include <png.h>

#include <cstring>
#include <fstream>
#include <iterator>
#include <string>

namespace csrnet {

namespace {

struct PngImage {
  png_image image;
  PngImage() {
    std::memset(&image, 0, sizeof(image));
    image.version = PNG_IMAGE_VERSION;
  }
  ~PngImage() { png_image_free(&image); }
  PngImage(const PngImage&) = delete;
  PngImage& operator=(const PngImage&) = delete;
};

}  // namespace

Image8 decode_png(std::span<const std::uint8_t> bytes) {
  PngImage png;
  if (!png_image_begin_read_from_memory(&png.image, bytes.data(), bytes.size())) {
    throw ImageIoError(std::string("cannot decode PNG: ") + png.image.message);
  }
  png.image.format = PNG_FORMAT_RGB;
  Image8 out{png.image.height, png.image.width, {}};
  if (out.height == 0 || out.width == 0) {
    throw ImageIoError("cannot decode PNG: empty image");
  }
  if (out.height * out.width > kMaxDecodedPixels) {
    throw ImageIoError("cannot decode PNG: " + std::to_string(out.width) + "x" +
                       std::to_string(out.height) + " exceeds the pixel limit");
  }
  out.rgb.resize(PNG_IMAGE_SIZE(png.image));
  if (!png_image_finish_read(&png.image, nullptr, out.rgb.data(), 0, nullptr)) {
    throw ImageIoError(std::string("cannot decode PNG: ") + png.image.message);
  }
  return out;
}

std::vector<std::uint8_t> encode_png(const Image8& image) {
  if (image.height == 0 || image.width == 0 ||
      image.rgb.size() != image.height * image.width * 3) {
    throw ImageIoError("cannot encode PNG: malformed image buffer");
  }
  PngImage png;
  png.image.width = static_cast<png_uint_32>(image.width);
  png.image.height = static_cast<png_uint_32>(image.height);
  png.image.format = PNG_FORMAT_RGB;

  png_alloc_size_t size = 0;
  if (!png_image_write_to_memory(&png.image, nullptr, &size, 0, image.rgb.data(),
                                 0, nullptr)) {
    throw ImageIoError(std::string("cannot encode PNG: ") + png.image.message);
  }
  std::vector<std::uint8_t> bytes(size);
  if (!png_image_write_to_memory(&png.image, bytes.data(), &size, 0,
                                 image.rgb.data(), 0, nullptr)) {
    throw ImageIoError(std::string("cannot encode PNG: ") + png.image.message);
  }
  bytes.resize(size);
  return bytes;
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ImageIoError("cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  if (in.bad()) throw ImageIoError("error reading " + path.string());
  return bytes;
}

void write_file(const std::filesystem::path& path,
                std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ImageIoError("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw ImageIoError("error writing " + path.string());
}

Image8 read_png(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  try {
    return decode_png(bytes);
  } catch (const ImageIoError& e) {
    throw ImageIoError(path.string() + ": " + e.what());
  }
}

void write_png(const std::filesystem::path& path, const Image8& image) {
  write_file(path, encode_png(image));
}

}  // namespace csrnet
