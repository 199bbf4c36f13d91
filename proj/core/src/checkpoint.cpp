#include "csrnet/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <map>

#include <json.hpp>

namespace csrnet {

namespace {

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O assumes a little-endian host");

constexpr char kMagic[4] = {'C', 'S', 'R', 'N'};

nlohmann::json config_json(const ModelConfig& c) {
  return {{"base_layers", c.base_layers},
          {"base_channels", c.base_channels},
          {"base_kernel", c.base_kernel},
          {"cond_channels", c.cond_channels},
          {"cond_vector_dim", c.cond_vector_dim},
          {"cond_first_kernel", c.cond_first_kernel},
          {"condition_source", to_string(c.condition_source)},
          {"prior_kind", to_string(c.prior_kind)}};
}

std::size_t count_field(const nlohmann::json& j, const char* key) {
  const auto& v = j.at(key);
  if (!v.is_number_unsigned()) {
    throw std::invalid_argument(std::string("config field '") + key +
                                "' must be a non-negative integer");
  }
  return v.get<std::size_t>();
}

ModelConfig parse_config(const nlohmann::json& j) {
  ModelConfig c;
  c.base_layers = count_field(j, "base_layers");
  c.base_channels = count_field(j, "base_channels");
  c.base_kernel = count_field(j, "base_kernel");
  c.cond_channels = count_field(j, "cond_channels");
  c.cond_vector_dim = count_field(j, "cond_vector_dim");
  c.cond_first_kernel = count_field(j, "cond_first_kernel");
  c.condition_source = parse_condition_source(j.at("condition_source").get<std::string>());
  c.prior_kind = parse_prior_kind(j.at("prior_kind").get<std::string>());
  c.validate();
  return c;
}

class Writer {
 public:
  void bytes(const void* data, std::size_t n) {
    const auto* p = static_cast<const std::uint8_t*>(data);
    out_.insert(out_.end(), p, p + n);
  }
  void u32(std::uint32_t v) { bytes(&v, sizeof v); }
  void string(const std::string& s) {
    u32(static_cast<std::uint32_t>(s.size()));
    bytes(s.data(), s.size());
  }
  std::vector<std::uint8_t> take() { return std::move(out_); }

 private:
  std::vector<std::uint8_t> out_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> data) : data_(data) {}

  void bytes(void* dst, std::size_t n, const char* what) {
    if (data_.size() - pos_ < n) {
      throw CheckpointError(std::string("checkpoint truncated while reading ") + what);
    }
    std::memcpy(dst, data_.data() + pos_, n);
    pos_ += n;
  }
  std::uint32_t u32(const char* what) {
    std::uint32_t v = 0;
    bytes(&v, sizeof v, what);
    return v;
  }
  std::string string(const char* what) {
    const std::uint32_t n = u32(what);
    if (data_.size() - pos_ < n) {
      throw CheckpointError(std::string("checkpoint truncated while reading ") + what);
    }
    std::string s(n, '\0');
    bytes(s.data(), n, what);
    return s;
  }
  bool done() const { return pos_ == data_.size(); }

 private:
  std::span<const std::uint8_t> data_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string config_to_json(const ModelConfig& config) {
  return config_json(config).dump();
}

ModelConfig config_from_json(const std::string& text) {
  return parse_config(nlohmann::json::parse(text));
}

std::vector<std::uint8_t> serialize_checkpoint(const Checkpoint& checkpoint) {
  Writer w;
  w.bytes(kMagic, sizeof kMagic);
  w.u32(kCheckpointVersion);
  const nlohmann::json header = {
      {"model", config_json(checkpoint.params.config)},
      {"training",
       {{"iterations", checkpoint.training.iterations},
        {"seed", checkpoint.training.seed},
        {"style", checkpoint.training.style}}}};
  w.string(header.dump());

  std::uint32_t count = 0;
  checkpoint.params.for_each_tensor([&](const std::string&, const Tensor&) { ++count; });
  w.u32(count);
  checkpoint.params.for_each_tensor([&](const std::string& name, const Tensor& t) {
    w.string(name);
    w.u32(static_cast<std::uint32_t>(t.rank()));
    for (std::size_t extent : t.shape()) w.u32(static_cast<std::uint32_t>(extent));
    w.bytes(t.raw(), t.size() * sizeof(float));
  });
  return w.take();
}

Checkpoint deserialize_checkpoint(std::span<const std::uint8_t> bytes) {
  Reader r(bytes);
  char magic[4];
  r.bytes(magic, sizeof magic, "magic");
  if (std::memcmp(magic, kMagic, sizeof kMagic) != 0) {
    throw CheckpointError("not a checkpoint: bad magic bytes");
  }
  const std::uint32_t version = r.u32("version");
  if (version != kCheckpointVersion) {
    throw CheckpointError("unsupported checkpoint version " + std::to_string(version) +
                          " (expected " + std::to_string(kCheckpointVersion) + ")");
  }

  Checkpoint checkpoint;
  try {
    const auto header = nlohmann::json::parse(r.string("header"));
    checkpoint.params = allocate_model(parse_config(header.at("model")));
    const auto& training = header.at("training");
    checkpoint.training.iterations = training.at("iterations").get<std::uint64_t>();
    checkpoint.training.seed = training.at("seed").get<std::uint64_t>();
    checkpoint.training.style = training.value("style", std::string{});
  } catch (const CheckpointError&) {
    throw;
  } catch (const std::exception& e) {
    throw CheckpointError(std::string("invalid checkpoint header: ") + e.what());
  }

  std::map<std::string, Tensor*> slots;
  checkpoint.params.for_each_tensor(
      [&](const std::string& name, Tensor& t) { slots.emplace(name, &t); });

  const std::uint32_t count = r.u32("tensor count");
  if (count != slots.size()) {
    throw CheckpointError("checkpoint holds " + std::to_string(count) +
                          " tensors, model expects " + std::to_string(slots.size()));
  }
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::string name = r.string("tensor name");
    const auto it = slots.find(name);
    if (it == slots.end()) throw CheckpointError("unexpected tensor '" + name + "'");
    const std::uint32_t rank = r.u32("tensor rank");
    if (rank == 0 || rank > kMaxRank) {
      throw CheckpointError("tensor '" + name + "' has invalid rank " + std::to_string(rank));
    }
    Shape shape(rank);
    for (auto& extent : shape) extent = r.u32("tensor extent");
    Tensor& slot = *it->second;
    if (shape != slot.shape()) {
      throw CheckpointError("tensor '" + name + "' has shape " + to_string(shape) +
                            ", model expects " + to_string(slot.shape()));
    }
    r.bytes(slot.raw(), slot.size() * sizeof(float), "tensor values");
    slots.erase(it);
  }
  if (!r.done()) throw CheckpointError("trailing bytes after checkpoint tensors");
  return checkpoint;
}

void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path) {
  const auto bytes = serialize_checkpoint(checkpoint);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw CheckpointError("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw CheckpointError("error writing " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint " + path.string());
  const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                        std::istreambuf_iterator<char>());
  try {
    return deserialize_checkpoint(bytes);
  } catch (const CheckpointError& e) {
    throw CheckpointError(path.string() + ": " + e.what());
  }
}

}  // namespace csrnet
