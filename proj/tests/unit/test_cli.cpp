#include <doctest.h>

#include <fstream>
#include <random>
#include <sstream>

#include <json.hpp>

#include "csrnet/checkpoint.hpp"
#include "csrnet/image_io.hpp"
#include "csrnet/tools/cli.hpp"
#include "fixtures.hpp"

using namespace csrnet;
using csrnet::testing::TempDir;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run csrnet_cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

void write_dataset(const fs::path& root, std::size_t count, std::uint64_t seed) {
  fs::create_directories(root / "input");
  fs::create_directories(root / "target");
  const auto pairs = csrnet::testing::distortion_pairs(count, 16, seed);
  for (const auto& p : pairs) {
    save_image(root / "input" / (p.name + ".png"), p.input);
    save_image(root / "target" / (p.name + ".png"), p.target);
  }
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

TEST_CASE("usage") {
  CHECK(csrnet_cli({}).code == cli::kUsage);
  CHECK(csrnet_cli({"frobnicate"}).code == cli::kUsage);
  const Run help = csrnet_cli({"--help"});
  CHECK(help.code == cli::kOk);
  CHECK(help.out.find("verify-ops") != std::string::npos);
  CHECK(csrnet_cli({"infer", "--model", "x"}).code == cli::kUsage);
}

TEST_CASE("train") {
  TempDir dir;
  write_dataset(dir / "data", 3, 11);
  const std::string data = (dir / "data").string();
  const std::string out1 = (dir / "a.csrn").string();
  const std::string out2 = (dir / "b.csrn").string();

  const Run first = csrnet_cli({"train", "--data-dir", data, "--out", out1, "--iters", "100",
                                "--seed", "7", "--log-interval", "25", "--style", "expert C"});
  REQUIRE_MESSAGE(first.code == cli::kOk, first.err);
  CHECK(fs::exists(out1));
  const Checkpoint ck = load_checkpoint(out1);
  CHECK(ck.training.iterations == 100);
  CHECK(ck.training.seed == 7);
  CHECK(ck.training.style == "expert C");

  std::ifstream log(out1 + ".log.jsonl");
  std::vector<nlohmann::json> lines;
  for (std::string line; std::getline(log, line);) lines.push_back(nlohmann::json::parse(line));
  REQUIRE(lines.size() == 5);
  CHECK(lines[0]["iteration"] == 25);
  CHECK(lines[3]["iteration"] == 100);
  CHECK(lines[4].contains("final"));
  CHECK(lines[4]["final"]["pairs"] == 3);

  SUBCASE("same flags give the same bytes") {
    const Run second = csrnet_cli({"train", "--data-dir", data, "--out", out2, "--iters", "100",
                                   "--seed", "7", "--log-interval", "25", "--style", "expert C"});
    REQUIRE(second.code == cli::kOk);
    CHECK(slurp(out1) == slurp(out2));
  }

  SUBCASE("condition-only finetune") {
    const Run bad = csrnet_cli({"train", "--data-dir", data, "--out", out2, "--mode",
                                "condition-only"});
    CHECK(bad.code == cli::kUsage);
    CHECK_FALSE(fs::exists(out2));

    const Run tuned = csrnet_cli({"train", "--data-dir", data, "--out", out2, "--iters", "20",
                                  "--mode", "condition-only", "--base", out1});
    REQUIRE_MESSAGE(tuned.code == cli::kOk, tuned.err);
    const Checkpoint t = load_checkpoint(out2);
    for (std::size_t i = 0; i < t.params.base.size(); ++i) {
      CHECK(t.params.base[i].weight == ck.params.base[i].weight);
    }
    CHECK(t.training.iterations == 120);
  }

  SUBCASE("errors") {
    CHECK(csrnet_cli({"train", "--data-dir", (dir / "nope").string(), "--out", out2}).code ==
          cli::kIo);
    CHECK(csrnet_cli({"train", "--data-dir", data, "--out", out2, "--mode", "sideways"}).code ==
          cli::kUsage);
    CHECK(csrnet_cli({"train", "--data-dir", data, "--out", out2, "--lr", "0"}).code ==
          cli::kUsage);
  }
}

TEST_CASE("infer") {
  TempDir dir;
  Checkpoint ck;
  ck.params = build_model(ModelConfig{}, 3);
  ck.params.beta_heads[2].bias.fill(0.1f);  // make the retouch visible
  save_checkpoint(ck, dir / "m.csrn");
  std::mt19937_64 rng(4);
  const ImageRGB input = from_8bit(to_8bit(csrnet::testing::random_image(12, 12, rng)));
  save_image(dir / "in.png", input);
  const std::string model = (dir / "m.csrn").string();
  const std::string in = (dir / "in.png").string();

  const Run plain = csrnet_cli({"infer", "--model", model, "--input", in, "--output",
                                (dir / "plain.png").string()});
  REQUIRE_MESSAGE(plain.code == cli::kOk, plain.err);
  CHECK(read_png(dir / "plain.png") == to_8bit(forward(ck.params, input)));
  CHECK_FALSE(read_png(dir / "plain.png") == to_8bit(input));

  REQUIRE(csrnet_cli({"infer", "--model", model, "--input", in, "--output",
                      (dir / "one.png").string(), "--alpha", "1.0"})
              .code == cli::kOk);
  CHECK(read_png(dir / "one.png") == to_8bit(input));

  REQUIRE(csrnet_cli({"infer", "--model", model, "--input", in, "--output",
                      (dir / "zero.png").string(), "--alpha", "0"})
              .code == cli::kOk);
  CHECK(slurp(dir / "zero.png") == slurp(dir / "plain.png"));

  const fs::path never = dir / "never.png";
  CHECK(csrnet_cli({"infer", "--model", (dir / "missing.csrn").string(), "--input", in,
                    "--output", never.string()})
            .code == cli::kIo);
  CHECK(csrnet_cli({"infer", "--model", model, "--input", in, "--output", never.string(),
                    "--alpha", "1.5"})
            .code == cli::kUsage);
  CHECK(csrnet_cli({"infer", "--model", model, "--input", (dir / "nope.png").string(),
                    "--output", never.string()})
            .code == cli::kIo);
  CHECK_FALSE(fs::exists(never));
}

TEST_CASE("verify-ops") {
  const Run ok = csrnet_cli({"verify-ops"});
  CHECK(ok.code == cli::kOk);
  for (const char* row : {"brightness", "contrast", "white_balance", "saturation", "tone_map"}) {
    CHECK(ok.out.find(row) != std::string::npos);
  }
  std::size_t rows = 0;
  for (std::size_t p = ok.out.find("PASS"); p != std::string::npos; p = ok.out.find("PASS", p + 1))
    ++rows;
  CHECK(rows == 5);

  CHECK(csrnet_cli({"verify-ops", "--tolerance", "0"}).code == cli::kVerificationFailed);
  CHECK(csrnet_cli({"verify-ops", "--tone-tolerance", "1e-9"}).code == cli::kVerificationFailed);
}

TEST_CASE("metrics and interpolate") {
  TempDir dir;
  std::mt19937_64 rng(5);
  const ImageRGB a = csrnet::testing::random_image(16, 16, rng);
  save_image(dir / "a.png", a);
  save_image(dir / "black.png", ImageRGB(16, 16, 0.0f));
  save_image(dir / "white.png", ImageRGB(16, 16, 1.0f));
  save_image(dir / "small.png", ImageRGB(8, 16, 0.0f));

  const Run same = csrnet_cli({"metrics", "--first", (dir / "a.png").string(), "--second",
                               (dir / "a.png").string()});
  REQUIRE(same.code == cli::kOk);
  const auto j = nlohmann::json::parse(same.out);
  CHECK(j["psnr"] == 100.0);
  CHECK(j["ssim"].get<double>() == doctest::Approx(1.0));
  CHECK(j["lab_l2"] == 0.0);

  CHECK(csrnet_cli({"metrics", "--first", (dir / "a.png").string(), "--second",
                    (dir / "small.png").string()})
            .code != cli::kOk);

  const Run mid = csrnet_cli({"interpolate", "--first", (dir / "black.png").string(), "--second",
                              (dir / "white.png").string(), "--alpha", "0.5", "--output",
                              (dir / "mid.png").string()});
  REQUIRE(mid.code == cli::kOk);
  for (auto v : read_png(dir / "mid.png").rgb) CHECK(v == 128);

  CHECK(csrnet_cli({"interpolate", "--first", (dir / "black.png").string(), "--second",
                    (dir / "small.png").string(), "--alpha", "0.5", "--output",
                    (dir / "x.png").string()})
            .code != cli::kOk);
  CHECK(csrnet_cli({"interpolate", "--first", (dir / "black.png").string(), "--second",
                    (dir / "white.png").string(), "--alpha", "-1", "--output",
                    (dir / "x.png").string()})
            .code == cli::kUsage);
}

TEST_CASE("serve argument checks") {
  TempDir dir;
  CHECK(csrnet_cli({"serve", "--model-dir", (dir / "missing").string()}).code == cli::kIo);
  CHECK(csrnet_cli({"serve", "--model-dir", dir.path().string(), "--port", "70000"}).code ==
        cli::kUsage);
}
