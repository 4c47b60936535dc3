#include "dgon/weights_io.hpp"

#include <zlib.h>

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <set>
#include <json.hpp>

#include "dgon/errors.hpp"

namespace dgon {

using nlohmann::json;

static_assert(std::endian::native == std::endian::little,
              "weight files are written with native little-endian byte order");

namespace {

const std::set<std::string>& model_keys() {
  static const std::set<std::string> keys{
      "gnn_layers", "gnn_width", "trunk_layers", "trunk_width", "latent_dim",
      "activation", "variant",   "sensors",      "memory_length", "horizon"};
  return keys;
}

json config_json(const ModelConfig& cfg) {
  return json{{"gnn_layers", cfg.gnn_layers},
              {"gnn_width", cfg.gnn_width},
              {"trunk_layers", cfg.trunk_layers},
              {"trunk_width", cfg.trunk_width},
              {"latent_dim", cfg.latent_dim},
              {"activation", std::string(to_string(cfg.activation))},
              {"variant", to_string(cfg.variant)},
              {"sensors", cfg.sensors},
              {"memory_length", cfg.memory_length},
              {"horizon", cfg.horizon}};
}

ModelConfig config_from(const json& j) {
  if (!j.is_object()) throw ConfigError("model config must be a JSON object");
  for (const auto& [key, _] : j.items()) {
    if (!model_keys().count(key)) throw ConfigError("unknown model config key '" + key + "'");
  }
  ModelConfig cfg;
  try {
    if (j.contains("gnn_layers")) cfg.gnn_layers = j["gnn_layers"].get<std::size_t>();
    if (j.contains("gnn_width")) cfg.gnn_width = j["gnn_width"].get<std::size_t>();
    if (j.contains("trunk_layers")) cfg.trunk_layers = j["trunk_layers"].get<std::size_t>();
    if (j.contains("trunk_width")) cfg.trunk_width = j["trunk_width"].get<std::size_t>();
    if (j.contains("latent_dim")) cfg.latent_dim = j["latent_dim"].get<std::size_t>();
    if (j.contains("activation")) cfg.activation = parse_activation(j["activation"].get<std::string>());
    if (j.contains("variant")) cfg.variant = parse_variant(j["variant"].get<std::string>());
    if (j.contains("sensors")) cfg.sensors = j["sensors"].get<std::size_t>();
    if (j.contains("memory_length")) cfg.memory_length = j["memory_length"].get<double>();
    if (j.contains("horizon")) cfg.horizon = j["horizon"].get<double>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("invalid model config value: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

class Writer {
 public:
  template <typename T>
  void put(T value) {
    unsigned char raw[sizeof(T)];
    std::memcpy(raw, &value, sizeof(T));
    bytes_.insert(bytes_.end(), raw, raw + sizeof(T));
  }
  void put_bytes(const void* data, std::size_t n) {
    const auto* p = static_cast<const unsigned char*>(data);
    bytes_.insert(bytes_.end(), p, p + n);
  }
  std::vector<unsigned char>& bytes() { return bytes_; }

 private:
  std::vector<unsigned char> bytes_;
};

class Reader {
 public:
  Reader(const unsigned char* data, std::size_t size) : data_(data), size_(size) {}

  template <typename T>
  T get() {
    T value;
    std::memcpy(&value, take(sizeof(T)), sizeof(T));
    return value;
  }
  const unsigned char* take(std::size_t n) {
    if (n > size_ - pos_) throw FormatError("corrupt weight file: truncated");
    const unsigned char* p = data_ + pos_;
    pos_ += n;
    return p;
  }
  bool at_end() const { return pos_ == size_; }

 private:
  const unsigned char* data_;
  std::size_t size_;
  std::size_t pos_ = 0;
};

std::uint32_t checksum(const unsigned char* data, std::size_t n) {
  return static_cast<std::uint32_t>(crc32(0L, data, static_cast<uInt>(n)));
}

}  // namespace

std::string model_config_to_json(const ModelConfig& cfg) { return config_json(cfg).dump(); }

ModelConfig model_config_from_json(const std::string& text) {
  try {
    return config_from(json::parse(text));
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("model config is not valid JSON: ") + e.what());
  }
}

std::string weight_config_block(const DeepGraphONet& model) {
  json block{{"model", config_json(model.config())}};
  if (!model.train_graph_id().empty()) block["train_graph_id"] = model.train_graph_id();
  return block.dump();
}

std::vector<unsigned char> serialize_model(const DeepGraphONet& model) {
  Writer w;
  w.put_bytes("DGON", 4);
  w.put<std::uint32_t>(kWeightFormatVersion);
  const std::string block = weight_config_block(model);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(block.size()));
  w.put_bytes(block.data(), block.size());
  const ParamStore& params = model.params();
  for (std::size_t i = 0; i < params.size(); ++i) {
    const std::string& name = params.name(ParamId{i});
    const Tensor& t = params.value(ParamId{i});
    w.put<std::uint32_t>(static_cast<std::uint32_t>(name.size()));
    w.put_bytes(name.data(), name.size());
    w.put<std::uint32_t>(static_cast<std::uint32_t>(t.rank()));
    for (std::size_t e : t.shape()) w.put<std::uint64_t>(e);
    w.put_bytes(t.data().data(), t.size() * sizeof(double));
  }
  const std::uint32_t crc = checksum(w.bytes().data(), w.bytes().size());
  w.put<std::uint32_t>(crc);
  return std::move(w.bytes());
}

DeepGraphONet deserialize_model(const std::vector<unsigned char>& bytes) {
  if (bytes.size() < 16) throw FormatError("corrupt weight file: truncated");
  if (std::memcmp(bytes.data(), "DGON", 4) != 0) throw FormatError("not a DGON weight file");
  const std::size_t body = bytes.size() - 4;
  std::uint32_t stored_crc;
  std::memcpy(&stored_crc, bytes.data() + body, 4);
  Reader r(bytes.data(), body);
  r.take(4);
  const auto version = r.get<std::uint32_t>();
  if (version != kWeightFormatVersion) {
    throw FormatError("unsupported weight format version " + std::to_string(version) +
                      " (expected " + std::to_string(kWeightFormatVersion) + ")");
  }
  if (checksum(bytes.data(), body) != stored_crc) {
    throw FormatError("corrupt weight file: checksum mismatch");
  }
  const auto block_len = r.get<std::uint32_t>();
  const auto* block_ptr = reinterpret_cast<const char*>(r.take(block_len));
  json block;
  try {
    block = json::parse(std::string(block_ptr, block_len));
  } catch (const json::parse_error&) {
    throw FormatError("corrupt weight file: config block is not JSON");
  }
  if (!block.is_object() || !block.contains("model")) {
    throw FormatError("corrupt weight file: config block lacks 'model'");
  }
  ModelConfig cfg = config_from(block["model"]);
  ParamStore params;
  while (!r.at_end()) {
    const auto name_len = r.get<std::uint32_t>();
    const auto* name_ptr = reinterpret_cast<const char*>(r.take(name_len));
    std::string name(name_ptr, name_len);
    const auto rank = r.get<std::uint32_t>();
    if (rank > 8) throw FormatError("corrupt weight file: implausible tensor rank");
    std::vector<std::size_t> shape(rank);
    std::size_t count = 1;
    for (auto& e : shape) {
      e = static_cast<std::size_t>(r.get<std::uint64_t>());
      count *= e;
    }
    if (count > body / sizeof(double)) throw FormatError("corrupt weight file: tensor too large");
    std::vector<double> data(count);
    std::memcpy(data.data(), r.take(count * sizeof(double)), count * sizeof(double));
    params.add(std::move(name), Tensor(std::move(shape), std::move(data)));
  }
  DeepGraphONet model(cfg, std::move(params));
  if (block.contains("train_graph_id")) {
    model.set_train_graph_id(block["train_graph_id"].get<std::string>());
  }
  return model;
}

void save_model(const DeepGraphONet& model, const std::filesystem::path& path) {
  const auto bytes = serialize_model(model);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write weight file " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("failed writing weight file " + path.string());
}

DeepGraphONet load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open weight file " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
  return deserialize_model(bytes);
}

}  // namespace dgon
