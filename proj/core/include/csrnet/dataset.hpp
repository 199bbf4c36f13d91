#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "csrnet/training.hpp"

namespace csrnet::train {

enum class Split { train, test };

struct DatasetIndex {
  std::vector<std::pair<std::filesystem::path, std::filesystem::path>> pairs;
  Split split = Split::train;
};

inline constexpr const char* kIndexFileName = "index.tsv";

/// Pairs `root/input/<stem>.png` with `root/target/<stem>.png`, sorted by
/// stem. When `root/index.tsv` exists its lines (`input<TAB>target`, paths
/// relative to `root`) are used instead.
DatasetIndex index_directory(const std::filesystem::path& root);

DatasetIndex read_index_file(const std::filesystem::path& index_file,
                             const std::filesystem::path& base_dir);

struct LoadedDataset {
  std::vector<TrainingPair> pairs;
  std::vector<std::string> warnings;
};

/// Decodes every pair, skipping (with a warning) files that fail to decode
/// or whose sizes differ. Throws when nothing usable remains.
LoadedDataset load_dataset(const DatasetIndex& index);

}  // namespace csrnet::train
