#include "csrnet/tools/cli.hpp"

#include <algorithm>
#include <csignal>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "csrnet/checkpoint.hpp"
#include "csrnet/classic_ops.hpp"
#include "csrnet/dataset.hpp"
#include "csrnet/image_io.hpp"
#include "csrnet/interpolation.hpp"
#include "csrnet/metrics.hpp"
#include "csrnet/tools/service.hpp"
#include "csrnet/training.hpp"

namespace csrnet::cli {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

// Input problems that are the caller's fault rather than the filesystem's.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct VerificationFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Writes next to `path` and renames, so a failed run never leaves a partial file.
template <typename Write>
void write_atomically(const fs::path& path, Write write) {
  fs::path tmp = path;
  tmp += ".tmp";
  write(tmp);
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw ImageIoError("cannot move output into place at " + path.string());
  }
}

struct TrainArgs {
  std::string data_dir;
  std::string out;
  std::uint64_t iters = 600'000;
  double lr = 1e-4;
  std::uint64_t decay_interval = 100'000;
  std::uint64_t seed = 0;
  std::string mode = "full";
  std::string base;
  std::string style;
  std::uint64_t log_interval = 100;
};

int cmd_train(const TrainArgs& a, std::ostream& out, std::ostream& err) {
  if (a.mode == "condition-only" && a.base.empty()) {
    throw UsageError("--mode condition-only requires --base <checkpoint>");
  }
  if (!(a.lr > 0.0)) throw UsageError("--lr must be positive");

  std::optional<Checkpoint> base;
  if (!a.base.empty()) base = load_checkpoint(a.base);

  auto dataset = train::load_dataset(train::index_directory(a.data_dir));
  for (const auto& w : dataset.warnings) err << "warning: " << w << "\n";

  const fs::path out_path = a.out;
  fs::path log_path = out_path;
  log_path += ".log.jsonl";
  std::ofstream log(log_path, std::ios::trunc);
  if (!log) throw ImageIoError("cannot write " + log_path.string());
  for (const auto& w : dataset.warnings) log << json{{"warning", w}}.dump() << "\n";

  train::TrainConfig config;
  config.iterations = a.iters;
  config.initial_step_size = a.lr;
  config.decay_interval = a.decay_interval;
  config.seed = a.seed;
  config.log_interval = a.log_interval;
  config.style = a.style;
  config.on_log = [&](const train::TrainLogEntry& e) {
    log << json{{"iteration", e.iteration},
                {"loss", e.loss},
                {"step_size", e.step_size},
                {"elapsed_seconds", e.elapsed_seconds}}
               .dump()
        << "\n";
    log.flush();
  };

  train::TrainResult result;
  if (a.mode == "condition-only") {
    result = train::finetune_condition(config, *base, dataset.pairs);
  } else {
    result = train::train(config, dataset.pairs,
                          base ? std::optional<ModelParams>(base->params) : std::nullopt);
  }

  const double l1 = train::dataset_loss(result.checkpoint.params, dataset.pairs);
  const double psnr = train::dataset_psnr(result.checkpoint.params, dataset.pairs);
  log << json{{"final",
               {{"iterations", result.checkpoint.training.iterations},
                {"pairs", dataset.pairs.size()},
                {"train_l1", l1},
                {"train_psnr", psnr}}}}
             .dump()
      << "\n";
  if (!log) throw ImageIoError("error writing " + log_path.string());

  write_atomically(out_path, [&](const fs::path& p) { save_checkpoint(result.checkpoint, p); });
  out << json{{"checkpoint", out_path.string()},
              {"log", log_path.string()},
              {"pairs", dataset.pairs.size()},
              {"train_l1", l1},
              {"train_psnr", psnr}}
             .dump()
      << "\n";
  return kOk;
}

struct InferArgs {
  std::string model;
  std::string input;
  std::string output;
  std::optional<double> alpha;
};

int cmd_infer(const InferArgs& a, std::ostream& out) {
  // Validate everything before touching the output path.
  std::optional<BlendAlpha> alpha;
  if (a.alpha) alpha = BlendAlpha(*a.alpha);
  const Checkpoint model = load_checkpoint(a.model);
  const ImageRGB input = load_image(a.input);
  ImageRGB result = forward(model.params, input);
  if (alpha) result = strength_control(input, result, *alpha);
  write_atomically(a.output, [&](const fs::path& p) { save_image(p, result); });
  out << json{{"output", a.output}, {"height", result.height()}, {"width", result.width()}}.dump()
      << "\n";
  return kOk;
}

struct VerifyArgs {
  double tolerance = 1e-6;
  double tone_tolerance = 1e-2;
  std::size_t trials = 100;
  std::size_t size = 8;
  std::uint64_t seed = 1;
};

int cmd_verify_ops(const VerifyArgs& a, std::ostream& out) {
  using namespace retouch;
  if (a.size * a.size > kMaxMaterializedInputs) {
    throw UsageError("--size too large for materialized networks");
  }
  EquivalenceOptions options;
  options.trials = a.trials;
  options.tolerance = a.tolerance;
  options.rows = a.size;
  options.cols = a.size;
  options.seed = a.seed;
  const double alphas[] = {0.0, 0.25, 0.5, 1.0, 1.5};

  struct Row {
    std::string name;
    std::string kind;
    double deviation = 0.0;
    double tolerance = 0.0;
    bool passed = true;
  };
  std::vector<Row> rows;
  auto sweep = [&](const std::string& name, auto direct, auto builder) {
    Row row{name, "exact", 0.0, a.tolerance, true};
    for (double alpha : alphas) {
      const auto r = verify_mlp_equivalence(
          [&](const ImageRGB& im) { return direct(im, alpha); },
          [&](const ImageRGB& im) { return builder(alpha, im); }, options);
      row.deviation = std::max(row.deviation, r.max_abs_deviation);
      row.passed = row.passed && r.passed;
    }
    rows.push_back(row);
  };
  sweep(
      "brightness", [](const ImageRGB& im, double s) { return adjust_brightness(im, s, Clamp::no); },
      [](double s, const ImageRGB& im) { return build_brightness_mlp(s, im.height(), im.width()); });
  sweep(
      "contrast", [](const ImageRGB& im, double s) { return adjust_contrast(im, s, Clamp::no); },
      [](double s, const ImageRGB& im) { return build_contrast_mlp(s, im.height(), im.width()); });
  {
    const auto r = verify_mlp_equivalence(
        [](const ImageRGB& im) { return white_balance_grayworld(im, Clamp::no); },
        [](const ImageRGB& im) {
          return build_white_balance_mlp(gray_world_gains(im), im.height(), im.width());
        },
        options);
    rows.push_back({"white_balance", "exact", r.max_abs_deviation, a.tolerance, r.passed});
  }
  sweep(
      "saturation", [](const ImageRGB& im, double s) { return adjust_saturation(im, s, Clamp::no); },
      [](double s, const ImageRGB& im) { return build_saturation_mlp(s, im.height(), im.width()); });
  {
    Row row{"tone_map", "approx", 0.0, a.tone_tolerance, true};
    for (double g : {0.5, 2.2}) {
      row.deviation = std::max(row.deviation, fit_tone_curve_mlp(g).max_error);
    }
    row.passed = row.deviation <= a.tone_tolerance;
    rows.push_back(row);
  }

  bool all = true;
  out << std::left << std::setw(15) << "operation" << std::setw(8) << "kind" << std::setw(14)
      << "max_dev" << std::setw(12) << "tolerance"
      << "result\n";
  for (const auto& r : rows) {
    out << std::left << std::setw(15) << r.name << std::setw(8) << r.kind << std::setw(14)
        << r.deviation << std::setw(12) << r.tolerance << (r.passed ? "PASS" : "FAIL") << "\n";
    all = all && r.passed;
  }
  return all ? kOk : kVerificationFailed;
}

std::pair<ImageRGB, ImageRGB> load_pair(const std::string& first, const std::string& second) {
  ImageRGB a = load_image(first);
  ImageRGB b = load_image(second);
  if (!a.same_size(b)) {
    throw UsageError("image sizes differ: " + std::to_string(a.width()) + "x" +
                     std::to_string(a.height()) + " vs " + std::to_string(b.width()) + "x" +
                     std::to_string(b.height()));
  }
  return {std::move(a), std::move(b)};
}

int cmd_metrics(const std::string& first, const std::string& second, std::ostream& out) {
  const auto [a, b] = load_pair(first, second);
  const auto report = metrics::evaluate(a, b);
  out << json{{"psnr", report.psnr}, {"ssim", report.ssim}, {"lab_l2", report.lab_l2}}.dump()
      << "\n";
  return kOk;
}

int cmd_interpolate(const std::string& first, const std::string& second, double alpha_value,
                    const std::string& output, std::ostream& out) {
  const BlendAlpha alpha(alpha_value);
  const auto [a, b] = load_pair(first, second);
  const ImageRGB mixed = blend(a, b, alpha);
  write_atomically(output, [&](const fs::path& p) { save_image(p, mixed); });
  out << json{{"output", output}, {"alpha", alpha.value()}}.dump() << "\n";
  return kOk;
}

int cmd_serve(const service::ServiceConfig& config, std::ostream& out, std::ostream& err) {
  if (config.model_dir.empty()) {
    throw UsageError("--model-dir (or CSRNET_MODEL_DIR) is required");
  }
  config.validate();
  auto registry = service::ModelRegistry::load(config.model_dir);
  for (const auto& w : registry.warnings()) err << "warning: " << w << "\n";

  // Signals are taken synchronously by a helper thread that stops the server.
  sigset_t signals;
  sigemptyset(&signals);
  sigaddset(&signals, SIGINT);
  sigaddset(&signals, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &signals, nullptr);

  service::Server server(config, std::move(registry));
  const int port = server.bind();
  out << "serving " << server.registry().entries().size() << " model(s) on http://"
      << config.host << ":" << port << "\n";
  out.flush();
  std::thread([&server, signals] {
    int sig = 0;
    sigwait(&signals, &sig);
    server.stop();
  }).detach();
  server.listen();
  return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Conditional sequential retouching network tools", "csrnet"};
  app.require_subcommand(1);

  TrainArgs train_args;
  auto* train = app.add_subcommand("train", "Train a model on paired images");
  train->add_option("--data-dir", train_args.data_dir, "Directory with input/ and target/")
      ->required();
  train->add_option("--out", train_args.out, "Checkpoint to write")->required();
  train->add_option("--iters", train_args.iters, "Training iterations")->capture_default_str();
  train->add_option("--lr", train_args.lr, "Initial step size")->capture_default_str();
  train->add_option("--decay-interval", train_args.decay_interval,
                    "Halve the step size every this many iterations")
      ->capture_default_str();
  train->add_option("--seed", train_args.seed)->capture_default_str();
  train->add_option("--mode", train_args.mode)
      ->check(CLI::IsMember({"full", "condition-only"}))
      ->capture_default_str();
  train->add_option("--base", train_args.base, "Checkpoint to start from");
  train->add_option("--style", train_args.style, "Style label stored in the checkpoint");
  train->add_option("--log-interval", train_args.log_interval)->capture_default_str();

  InferArgs infer_args;
  double infer_alpha = 0.0;
  auto* infer = app.add_subcommand("infer", "Retouch one image");
  infer->add_option("--model", infer_args.model)->required();
  infer->add_option("--input", infer_args.input)->required();
  infer->add_option("--output", infer_args.output)->required();
  auto* alpha_opt = infer->add_option(
      "--alpha", infer_alpha, "Blend back towards the input: 0 full retouch, 1 original");

  VerifyArgs verify_args;
  auto* verify = app.add_subcommand("verify-ops", "Check operation/network equivalences");
  verify->add_option("--tolerance", verify_args.tolerance)->capture_default_str();
  verify->add_option("--tone-tolerance", verify_args.tone_tolerance)->capture_default_str();
  verify->add_option("--trials", verify_args.trials)->capture_default_str();
  verify->add_option("--size", verify_args.size, "Side of the random test images")
      ->capture_default_str();
  verify->add_option("--seed", verify_args.seed)->capture_default_str();

  std::string first, second, output;
  double alpha = 0.5;
  auto* metrics_cmd = app.add_subcommand("metrics", "PSNR, SSIM and Lab error of two images");
  metrics_cmd->add_option("--first", first)->required();
  metrics_cmd->add_option("--second", second)->required();

  auto* interp = app.add_subcommand("interpolate", "alpha * first + (1 - alpha) * second");
  interp->add_option("--first", first)->required();
  interp->add_option("--second", second)->required();
  interp->add_option("--alpha", alpha)->required();
  interp->add_option("--output", output)->required();

  service::ServiceConfig serve_config;
  std::string model_dir, static_dir;
  auto* serve = app.add_subcommand("serve", "Run the HTTP service");
  serve->add_option("--model-dir", model_dir)->envname("CSRNET_MODEL_DIR");
  serve->add_option("--host", serve_config.host)->capture_default_str();
  serve->add_option("--port", serve_config.port)->capture_default_str();
  serve->add_option("--max-upload-bytes", serve_config.max_upload_bytes)->capture_default_str();
  serve->add_option("--timeout", serve_config.request_timeout_seconds, "Seconds")
      ->capture_default_str();
  serve->add_option("--workers", serve_config.workers)->capture_default_str();
  serve->add_option("--static-dir", static_dir, "Assets served under /");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*train) return cmd_train(train_args, out, err);
    if (*infer) {
      if (alpha_opt->count() > 0) infer_args.alpha = infer_alpha;
      return cmd_infer(infer_args, out);
    }
    if (*verify) return cmd_verify_ops(verify_args, out);
    if (*metrics_cmd) return cmd_metrics(first, second, out);
    if (*interp) return cmd_interpolate(first, second, alpha, output, out);
    if (*serve) {
      serve_config.model_dir = model_dir;
      serve_config.static_dir = static_dir;
      return cmd_serve(serve_config, out, err);
    }
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const std::exception& e) {
    // Files that cannot be read, decoded or written.
    err << "error: " << e.what() << "\n";
    return kIo;
  }
  return kUsage;
}

}  // namespace csrnet::cli
