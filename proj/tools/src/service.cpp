#include "csrnet/tools/service.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <optional>
#include <stdexcept>

#include <httplib.h>
#include <json.hpp>

#include "csrnet/image_io.hpp"
#include "csrnet/interpolation.hpp"
#include "csrnet/model.hpp"

namespace csrnet::service {

namespace fs = std::filesystem;
using nlohmann::json;

void ServiceConfig::validate() const {
  if (port < 0 || port > 65535) {
    throw std::invalid_argument("port must be in [1, 65535] (or 0 for any free port)");
  }
  if (max_upload_bytes == 0) throw std::invalid_argument("max upload size must be positive");
  if (request_timeout_seconds <= 0) throw std::invalid_argument("request timeout must be positive");
  if (workers == 0) throw std::invalid_argument("worker count must be positive");
  if (!static_dir.empty() && !fs::is_directory(static_dir)) {
    throw std::invalid_argument("static directory " + static_dir.string() + " does not exist");
  }
}

ModelRegistry ModelRegistry::load(const fs::path& dir) {
  if (!fs::is_directory(dir)) {
    throw std::runtime_error("model directory " + dir.string() + " does not exist");
  }
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".csrn") {
      files.push_back(entry.path());
    }
  }
  std::sort(files.begin(), files.end());

  ModelRegistry registry;
  for (const auto& path : files) {
    try {
      ModelEntry e;
      e.checkpoint = load_checkpoint(path);
      e.id = path.stem().string();
      e.style = e.checkpoint.training.style;
      e.parameters = count_parameters(e.checkpoint.params);
      e.path = path;
      registry.entries_.push_back(std::move(e));
    } catch (const std::exception& ex) {
      registry.warnings_.push_back("skipping " + path.string() + ": " + ex.what());
    }
  }
  return registry;
}

const ModelEntry* ModelRegistry::find(const std::string& id) const {
  for (const auto& e : entries_) {
    if (e.id == id) return &e;
  }
  return nullptr;
}

std::string ModelRegistry::to_json() const {
  json list = json::array();
  for (const auto& e : entries_) {
    list.push_back({{"id", e.id},
                    {"style", e.style},
                    {"parameters", e.parameters},
                    {"path", e.path.string()}});
  }
  return list.dump();
}

namespace {

// Carries an HTTP status out of request handling.
struct HttpError : std::runtime_error {
  int status;
  HttpError(int s, const std::string& message) : std::runtime_error(message), status(s) {}
};

void send_error(httplib::Response& res, int status, const std::string& message) {
  res.status = status;
  res.set_content(json{{"error", message}}.dump(), "application/json");
}

// Multipart part or, failing that, an ordinary form/query parameter.
std::optional<std::string> field(const httplib::Request& req, const std::string& name) {
  if (req.has_file(name)) return req.get_file_value(name).content;
  if (req.has_param(name)) return req.get_param_value(name);
  return std::nullopt;
}

std::string required(const httplib::Request& req, const std::string& name) {
  auto value = field(req, name);
  if (!value || value->empty()) throw HttpError(400, "missing field '" + name + "'");
  return *value;
}

BlendAlpha parse_alpha(const std::string& text) {
  double v = 0.0;
  const char* begin = text.data();
  const char* end = begin + text.size();
  const auto [ptr, ec] = std::from_chars(begin, end, v);
  if (ec != std::errc() || ptr != end || !std::isfinite(v) || v < 0.0 || v > 1.0) {
    throw HttpError(400, "alpha must be a number in [0, 1], got '" + text + "'");
  }
  return BlendAlpha(v);
}

ImageRGB decode_upload(const httplib::Request& req) {
  if (!req.has_file("image")) throw HttpError(400, "missing file field 'image'");
  const std::string& content = req.get_file_value("image").content;
  try {
    const auto* bytes = reinterpret_cast<const std::uint8_t*>(content.data());
    return from_8bit(decode_png(std::span(bytes, content.size())));
  } catch (const std::exception& e) {
    throw HttpError(400, std::string("image could not be decoded: ") + e.what());
  }
}

void send_png(httplib::Response& res, const ImageRGB& image) {
  const auto png = encode_png(to_8bit(image));
  res.status = 200;
  res.set_content(std::string(png.begin(), png.end()), "image/png");
}

}  // namespace

struct Server::Impl {
  ServiceConfig config;
  ModelRegistry registry;
  httplib::Server http;
  int port = -1;

  const ModelEntry& model(const std::string& id) const {
    const ModelEntry* e = registry.find(id);
    if (e == nullptr) throw HttpError(404, "unknown model '" + id + "'");
    return *e;
  }

  static ImageRGB run(const ModelEntry& m, const ImageRGB& image) {
    try {
      return forward(m.checkpoint.params, image);
    } catch (const std::invalid_argument& e) {
      throw HttpError(400, e.what());
    }
  }

  template <typename F>
  httplib::Server::Handler guarded(F body) {
    return [body](const httplib::Request& req, httplib::Response& res) {
      try {
        body(req, res);
      } catch (const HttpError& e) {
        send_error(res, e.status, e.what());
      } catch (const std::exception& e) {
        send_error(res, 500, e.what());
      }
    };
  }

  void routes() {
    http.Get("/healthz", [](const httplib::Request&, httplib::Response& res) {
      res.set_content("ok", "text/plain");
    });
    http.Get("/api/models", [this](const httplib::Request&, httplib::Response& res) {
      res.set_content(registry.to_json(), "application/json");
    });
    http.Post("/api/retouch", guarded([this](const httplib::Request& req, httplib::Response& res) {
      const ModelEntry& m = model(required(req, "model_id"));
      const auto alpha_text = field(req, "alpha");
      const BlendAlpha alpha = alpha_text ? parse_alpha(*alpha_text) : BlendAlpha(0.0);
      const ImageRGB input = decode_upload(req);
      send_png(res, strength_control(input, run(m, input), alpha));
    }));
    http.Post("/api/style_blend",
              guarded([this](const httplib::Request& req, httplib::Response& res) {
                const ModelEntry& a = model(required(req, "model_a"));
                const ModelEntry& b = model(required(req, "model_b"));
                const BlendAlpha alpha = parse_alpha(required(req, "alpha"));
                const ImageRGB input = decode_upload(req);
                send_png(res, blend(run(a, input), run(b, input), alpha));
              }));

    // Fills in bodies for statuses raised by the HTTP layer itself (413, 404).
    http.set_error_handler([](const httplib::Request&, httplib::Response& res) {
      if (!res.body.empty()) return;
      const char* message = res.status == 413   ? "upload exceeds the size limit"
                            : res.status == 404 ? "not found"
                                                : "request failed";
      send_error(res, res.status, message);
    });
  }
};

Server::Server(ServiceConfig config, ModelRegistry registry) : impl_(std::make_unique<Impl>()) {
  config.validate();
  impl_->config = std::move(config);
  impl_->registry = std::move(registry);
  auto& http = impl_->http;
  const std::size_t workers = impl_->config.workers;
  const std::size_t queued = impl_->config.max_queued;
  http.new_task_queue = [workers, queued] { return new httplib::ThreadPool(workers, queued); };
  http.set_payload_max_length(impl_->config.max_upload_bytes);
  http.set_read_timeout(impl_->config.request_timeout_seconds, 0);
  http.set_write_timeout(impl_->config.request_timeout_seconds, 0);
  impl_->routes();
  if (!impl_->config.static_dir.empty()) {
    http.set_mount_point("/", impl_->config.static_dir.string());
  }
}

Server::~Server() { stop(); }

int Server::bind() {
  auto& c = impl_->config;
  if (c.port == 0) {
    impl_->port = impl_->http.bind_to_any_port(c.host);
  } else {
    impl_->port = impl_->http.bind_to_port(c.host, c.port) ? c.port : -1;
  }
  if (impl_->port < 0) {
    throw std::runtime_error("cannot bind " + c.host + ":" + std::to_string(c.port));
  }
  return impl_->port;
}

void Server::listen() { impl_->http.listen_after_bind(); }

void Server::stop() {
  if (impl_ && impl_->http.is_running()) impl_->http.stop();
}

void Server::wait_until_ready() const { impl_->http.wait_until_ready(); }

const ModelRegistry& Server::registry() const { return impl_->registry; }

}  // namespace csrnet::service
