#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "csrnet/model.hpp"

namespace csrnet {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct TrainingMetadata {
  std::uint64_t iterations = 0;
  std::uint64_t seed = 0;
  std::string style;  // free-form label, e.g. the expert the targets came from

  friend bool operator==(const TrainingMetadata&, const TrainingMetadata&) = default;
};

struct Checkpoint {
  ModelParams params;
  TrainingMetadata training;
};

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Layout, all integers little-endian:
///   "CSRN" | u32 version | u32 len + UTF-8 JSON header (model config and
///   training metadata) | u32 tensor count | per tensor: u32 len + UTF-8
///   name, u32 rank, u32 extents..., float32 values.
std::vector<std::uint8_t> serialize_checkpoint(const Checkpoint& checkpoint);
Checkpoint deserialize_checkpoint(std::span<const std::uint8_t> bytes);

void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

std::string config_to_json(const ModelConfig& config);
ModelConfig config_from_json(const std::string& text);

}  // namespace csrnet
