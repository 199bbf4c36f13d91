#include "csrnet/dataset.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <stdexcept>

#include "csrnet/image_io.hpp"

namespace fs = std::filesystem;

namespace csrnet::train {

DatasetIndex read_index_file(const fs::path& index_file, const fs::path& base_dir) {
  std::ifstream in(index_file);
  if (!in) throw std::runtime_error("cannot open dataset index " + index_file.string());
  DatasetIndex index;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) {
      throw std::runtime_error(index_file.string() + ":" + std::to_string(line_no) +
                               ": expected input<TAB>target");
    }
    index.pairs.emplace_back(base_dir / line.substr(0, tab), base_dir / line.substr(tab + 1));
  }
  return index;
}

DatasetIndex index_directory(const fs::path& root) {
  if (!fs::is_directory(root)) {
    throw std::runtime_error("dataset directory " + root.string() + " does not exist");
  }
  if (fs::exists(root / kIndexFileName)) return read_index_file(root / kIndexFileName, root);

  const fs::path input_dir = root / "input";
  const fs::path target_dir = root / "target";
  if (!fs::is_directory(input_dir) || !fs::is_directory(target_dir)) {
    throw std::runtime_error("dataset directory " + root.string() +
                             " needs input/ and target/ subdirectories or an " +
                             kIndexFileName);
  }
  std::map<std::string, fs::path> targets;
  for (const auto& entry : fs::directory_iterator(target_dir)) {
    if (entry.is_regular_file()) targets.emplace(entry.path().stem().string(), entry.path());
  }
  std::map<std::string, fs::path> inputs;
  for (const auto& entry : fs::directory_iterator(input_dir)) {
    if (entry.is_regular_file()) inputs.emplace(entry.path().stem().string(), entry.path());
  }
  DatasetIndex index;
  for (const auto& [stem, path] : inputs) {
    const auto it = targets.find(stem);
    if (it != targets.end()) index.pairs.emplace_back(path, it->second);
  }
  return index;
}

LoadedDataset load_dataset(const DatasetIndex& index) {
  LoadedDataset out;
  for (const auto& [input_path, target_path] : index.pairs) {
    try {
      TrainingPair pair{load_image(input_path), load_image(target_path),
                        input_path.stem().string()};
      if (!pair.input.same_size(pair.target)) {
        out.warnings.push_back("skipping " + input_path.string() +
                               ": target size differs from input");
        continue;
      }
      out.pairs.push_back(std::move(pair));
    } catch (const std::exception& e) {
      out.warnings.push_back("skipping " + input_path.string() + ": " + e.what());
    }
  }
  if (out.pairs.empty()) {
    throw std::runtime_error("dataset has no usable image pairs (" +
                             std::to_string(index.pairs.size()) + " listed)");
  }
  return out;
}

}  // namespace csrnet::train
