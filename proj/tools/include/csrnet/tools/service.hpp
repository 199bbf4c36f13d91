#pragma once

#include <cstddef>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "csrnet/checkpoint.hpp"

namespace csrnet::service {

struct ServiceConfig {
  std::filesystem::path model_dir;
  std::string host = "127.0.0.1";
  int port = 8080;  // 0 picks a free port
  std::size_t max_upload_bytes = 16u << 20;
  int request_timeout_seconds = 30;
  std::size_t workers = 4;
  std::size_t max_queued = 64;
  std::filesystem::path static_dir;  // served under "/" when set

  /// Throws std::invalid_argument on out-of-range values.
  void validate() const;
};

struct ModelEntry {
  std::string id;  // file stem
  std::string style;
  std::size_t parameters = 0;
  std::filesystem::path path;
  Checkpoint checkpoint;
};

/// Checkpoints loaded once at startup, immutable afterwards.
class ModelRegistry {
 public:
  /// Loads every `*.csrn` in `dir`, sorted by id. Files that fail to load
  /// are skipped and reported in warnings().
  static ModelRegistry load(const std::filesystem::path& dir);

  const std::vector<ModelEntry>& entries() const { return entries_; }
  const ModelEntry* find(const std::string& id) const;
  const std::vector<std::string>& warnings() const { return warnings_; }

  /// JSON array of {id, style, parameters, path}.
  std::string to_json() const;

 private:
  std::vector<ModelEntry> entries_;
  std::vector<std::string> warnings_;
};

/// HTTP front end:
///   GET  /api/models
///   POST /api/retouch      multipart: image, model_id, alpha (default 0)
///   POST /api/style_blend  multipart: image, model_a, model_b, alpha
///   GET  /healthz
class Server {
 public:
  Server(ServiceConfig config, ModelRegistry registry);
  ~Server();
  Server(const Server&) = delete;
  Server& operator=(const Server&) = delete;

  /// Binds the socket; returns the bound port. Throws on failure.
  int bind();
  /// Serves until stop(). bind() must have succeeded.
  void listen();
  void stop();
  void wait_until_ready() const;

  const ModelRegistry& registry() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace csrnet::service
