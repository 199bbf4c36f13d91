#include <doctest.h>

#include <fstream>
#include <future>
#include <random>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "csrnet/image_io.hpp"
#include "csrnet/interpolation.hpp"
#include "csrnet/tools/service.hpp"
#include "fixtures.hpp"

using namespace csrnet;
using namespace csrnet::service;
using csrnet::testing::TempDir;

namespace {

Checkpoint styled_model(std::uint64_t seed, const std::string& style, float shift) {
  Checkpoint ck;
  ck.params = build_model(ModelConfig{}, seed);
  ck.params.beta_heads[2].bias.fill(shift);
  ck.training.style = style;
  return ck;
}

// Server on a free local port, running on a background thread.
class Running {
 public:
  Running(ServiceConfig config, const std::filesystem::path& models)
      : server_(std::move(config), ModelRegistry::load(models)) {
    port_ = server_.bind();
    thread_ = std::thread([this] { server_.listen(); });
    server_.wait_until_ready();
  }
  ~Running() {
    server_.stop();
    thread_.join();
  }
  httplib::Client client() const {
    httplib::Client c("127.0.0.1", port_);
    c.set_read_timeout(60, 0);
    return c;
  }
  const Server& server() const { return server_; }

 private:
  Server server_;
  int port_ = 0;
  std::thread thread_;
};

std::string png_string(const ImageRGB& image) {
  const auto bytes = encode_png(to_8bit(image));
  return {bytes.begin(), bytes.end()};
}

Image8 decode(const std::string& body) {
  return decode_png(std::span(reinterpret_cast<const std::uint8_t*>(body.data()), body.size()));
}

httplib::MultipartFormDataItems form(const std::string& image,
                                     std::vector<std::pair<std::string, std::string>> fields) {
  httplib::MultipartFormDataItems items{{"image", image, "upload.png", "image/png"}};
  for (auto& [k, v] : fields) items.push_back({k, v, "", ""});
  return items;
}

}  // namespace

TEST_CASE("service") {
  TempDir dir;
  const auto models = dir / "models";
  std::filesystem::create_directories(models);
  const Checkpoint a = styled_model(1, "expert A", 0.08f);
  const Checkpoint b = styled_model(2, "expert B", -0.08f);
  save_checkpoint(a, models / "a.csrn");
  save_checkpoint(b, models / "b.csrn");
  std::ofstream(models / "broken.csrn") << "garbage";
  std::ofstream(models / "notes.txt") << "ignored";

  const auto assets = dir / "static";
  std::filesystem::create_directories(assets);
  std::ofstream(assets / "index.html") << "<!doctype html><title>retouch</title>";

  ServiceConfig config;
  config.port = 0;
  config.max_upload_bytes = 64 * 1024;
  config.static_dir = assets;
  Running running(config, models);
  auto client = running.client();

  std::mt19937_64 rng(9);
  const ImageRGB input = from_8bit(to_8bit(csrnet::testing::random_image(16, 16, rng)));
  const std::string upload = png_string(input);

  SUBCASE("health and registry") {
    auto health = client.Get("/healthz");
    REQUIRE(health);
    CHECK(health->status == 200);
    CHECK(health->body == "ok");

    CHECK(running.server().registry().warnings().size() == 1);
    auto res = client.Get("/api/models");
    REQUIRE(res);
    CHECK(res->status == 200);
    const auto list = nlohmann::json::parse(res->body);
    REQUIRE(list.size() == 2);
    CHECK(list[0]["id"] == "a");
    CHECK(list[1]["id"] == "b");
    CHECK(list[0]["style"] == "expert A");
    for (const auto& e : list) CHECK(e["parameters"] == 36489);
  }

  SUBCASE("retouch") {
    auto full = client.Post("/api/retouch", form(upload, {{"model_id", "a"}}));
    REQUIRE(full);
    REQUIRE(full->status == 200);
    CHECK(full->get_header_value("Content-Type") == "image/png");
    CHECK(decode(full->body) == to_8bit(forward(a.params, input)));

    auto original = client.Post("/api/retouch", form(upload, {{"model_id", "a"}, {"alpha", "1.0"}}));
    REQUIRE(original);
    REQUIRE(original->status == 200);
    CHECK(decode(original->body) == to_8bit(input));

    auto half = client.Post("/api/retouch", form(upload, {{"model_id", "b"}, {"alpha", "0.5"}}));
    REQUIRE(half);
    CHECK(decode(half->body) ==
          to_8bit(strength_control(input, forward(b.params, input), BlendAlpha(0.5))));
  }

  SUBCASE("style blend") {
    auto one = client.Post("/api/style_blend",
                           form(upload, {{"model_a", "a"}, {"model_b", "b"}, {"alpha", "1"}}));
    auto plain = client.Post("/api/retouch", form(upload, {{"model_id", "a"}}));
    REQUIRE(one);
    REQUIRE(plain);
    REQUIRE(one->status == 200);
    CHECK(one->body == plain->body);

    auto zero = client.Post("/api/style_blend",
                            form(upload, {{"model_a", "a"}, {"model_b", "b"}, {"alpha", "0"}}));
    REQUIRE(zero);
    CHECK(decode(zero->body) == to_8bit(forward(b.params, input)));

    auto missing = client.Post("/api/style_blend", form(upload, {{"model_a", "a"}, {"model_b", "b"}}));
    REQUIRE(missing);
    CHECK(missing->status == 400);
  }

  SUBCASE("errors") {
    auto unknown = client.Post("/api/retouch", form(upload, {{"model_id", "zzz"}}));
    REQUIRE(unknown);
    CHECK(unknown->status == 404);
    CHECK(nlohmann::json::parse(unknown->body).contains("error"));

    auto unknown_b = client.Post("/api/style_blend",
                                 form(upload, {{"model_a", "a"}, {"model_b", "q"}, {"alpha", "0.5"}}));
    REQUIRE(unknown_b);
    CHECK(unknown_b->status == 404);

    for (const char* alpha : {"1.5", "-0.1", "abc", "0.5x", "nan"}) {
      CAPTURE(alpha);
      auto res = client.Post("/api/retouch", form(upload, {{"model_id", "a"}, {"alpha", alpha}}));
      REQUIRE(res);
      CHECK(res->status == 400);
    }

    auto junk = client.Post("/api/retouch", form("not an image", {{"model_id", "a"}}));
    REQUIRE(junk);
    CHECK(junk->status == 400);

    httplib::MultipartFormDataItems no_image{{"model_id", "a", "", ""}};
    auto absent = client.Post("/api/retouch", no_image);
    REQUIRE(absent);
    CHECK(absent->status == 400);

    // Too small for the condition network.
    auto tiny = client.Post("/api/retouch", form(png_string(ImageRGB(4, 4, 0.5f)), {{"model_id", "a"}}));
    REQUIRE(tiny);
    CHECK(tiny->status == 400);

    const std::string big(100 * 1024, 'x');
    auto oversized = client.Post("/api/retouch", form(big, {{"model_id", "a"}}));
    REQUIRE(oversized);
    CHECK(oversized->status == 413);
  }

  SUBCASE("concurrent identical requests") {
    std::vector<std::future<std::string>> futures;
    for (int i = 0; i < 6; ++i) {
      futures.push_back(std::async(std::launch::async, [&] {
        auto c = running.client();
        auto res = c.Post("/api/retouch", form(upload, {{"model_id", "b"}, {"alpha", "0.25"}}));
        return res && res->status == 200 ? res->body : std::string();
      }));
    }
    const std::string first = futures[0].get();
    CHECK_FALSE(first.empty());
    for (std::size_t i = 1; i < futures.size(); ++i) CHECK(futures[i].get() == first);
  }

  SUBCASE("static assets") {
    auto page = client.Get("/index.html");
    REQUIRE(page);
    CHECK(page->status == 200);
    CHECK(page->body.find("retouch") != std::string::npos);
    auto missing = client.Get("/nope.js");
    REQUIRE(missing);
    CHECK(missing->status == 404);
  }
}

TEST_CASE("service configuration") {
  ServiceConfig config;
  config.port = 70000;
  CHECK_THROWS_AS(config.validate(), std::invalid_argument);
  config.port = 8080;
  config.max_upload_bytes = 0;
  CHECK_THROWS_AS(config.validate(), std::invalid_argument);
  config.max_upload_bytes = 1;
  config.workers = 0;
  CHECK_THROWS_AS(config.validate(), std::invalid_argument);
  CHECK_THROWS(ModelRegistry::load("/definitely/not/here"));
}
