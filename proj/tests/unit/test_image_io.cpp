#include <doctest.h>

#include <fstream>
#include <random>

#include "csrnet/image_io.hpp"
#include "fixtures.hpp"

using namespace csrnet;
using csrnet::testing::random_image;
using csrnet::testing::TempDir;

namespace {

Image8 random_image8(std::size_t h, std::size_t w, std::mt19937_64& rng) {
  std::uniform_int_distribution<int> byte(0, 255);
  Image8 img{h, w, std::vector<std::uint8_t>(h * w * 3)};
  for (auto& v : img.rgb) v = static_cast<std::uint8_t>(byte(rng));
  return img;
}

}  // namespace

TEST_CASE("8-bit conversion") {
  std::mt19937_64 rng(1);
  const Image8 img = random_image8(5, 7, rng);
  const ImageRGB f = from_8bit(img);
  CHECK(f.height() == 5);
  CHECK(f.width() == 7);
  // Interleaved bytes land in channel-major planes.
  CHECK(f.at(2, 4, 6) == static_cast<float>(img.rgb[(4 * 7 + 6) * 3 + 2]) / 255.0f);
  CHECK(to_8bit(f) == img);

  CHECK_THROWS_AS(from_8bit(Image8{2, 2, std::vector<std::uint8_t>(11)}), std::invalid_argument);
  CHECK_THROWS_AS(from_8bit(Image8{0, 2, {}}), std::invalid_argument);
}

TEST_CASE("png round trip") {
  std::mt19937_64 rng(2);
  const Image8 img = random_image8(9, 4, rng);
  CHECK(decode_png(encode_png(img)) == img);

  TempDir dir;
  write_png(dir / "x.png", img);
  CHECK(read_png(dir / "x.png") == img);

  const ImageRGB f = random_image(6, 6, rng);
  save_image(dir / "f.png", f);
  CHECK(to_8bit(load_image(dir / "f.png")) == to_8bit(f));

  CHECK(encode_png(img) == encode_png(img));
}

TEST_CASE("png errors") {
  const std::vector<std::uint8_t> junk = {1, 2, 3, 4, 5, 6, 7, 8, 9};
  CHECK_THROWS_AS(decode_png(junk), ImageIoError);
  CHECK_THROWS_AS(decode_png(std::span<const std::uint8_t>()), ImageIoError);

  std::mt19937_64 rng(3);
  auto bytes = encode_png(random_image8(8, 8, rng));
  bytes.resize(bytes.size() / 2);
  CHECK_THROWS_AS(decode_png(bytes), ImageIoError);

  TempDir dir;
  CHECK_THROWS_AS(read_png(dir / "missing.png"), ImageIoError);
  CHECK_THROWS_AS(write_png(dir / "no" / "such" / "dir.png", random_image8(2, 2, rng)),
                  ImageIoError);
  CHECK_THROWS_AS(encode_png(Image8{}), ImageIoError);
}
