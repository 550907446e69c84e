#include "wip/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <map>
#include <stdexcept>

#include "wip/hash.hpp"
#include "wip/io.hpp"
#include "wip/trainer.hpp"

namespace wip {
namespace {

constexpr char kMagic[8] = {'W', 'I', 'P', 'C', 'K', 'P', 'T', '1'};

static_assert(std::endian::native == std::endian::little,
              "checkpoint tensors are stored little-endian");

template <typename U>
void put(std::string& out, U v) {
  char buf[sizeof(U)];
  std::memcpy(buf, &v, sizeof(U));
  out.append(buf, sizeof(U));
}

template <typename U>
U get(const std::string& in, std::size_t& at) {
  if (at + sizeof(U) > in.size()) throw std::runtime_error("checkpoint: truncated");
  U v;
  std::memcpy(&v, in.data() + at, sizeof(U));
  at += sizeof(U);
  return v;
}

struct Tensor {
  std::string name;
  std::vector<std::size_t> shape;
  std::vector<float>* data;
};

std::vector<Tensor> tensors_of(Model<float>& model) {
  std::vector<Tensor> out;
  for (auto* p : model.all_params()) out.push_back({p->name, p->shape, &p->value});
  for (auto& b : model.buffers()) out.push_back({b.name, {b.data->size()}, b.data});
  return out;
}

}  // namespace

std::string serialize_checkpoint(Model<float>& model, const NormalizationStats& stats,
                                 const WindowConfig& window, const nlohmann::json& metadata,
                                 std::string* model_id) {
  const auto tensors = tensors_of(model);
  std::string payload;
  nlohmann::json table = nlohmann::json::array();
  for (const auto& t : tensors) {
    if (t.data->empty()) continue;
    table.push_back({{"name", t.name}, {"shape", t.shape}, {"count", t.data->size()}});
    payload.append(reinterpret_cast<const char*>(t.data->data()), t.data->size() * sizeof(float));
  }
  nlohmann::json header = {{"format", "wip-checkpoint"},
                           {"version", kCheckpointVersion},
                           {"model_config", to_json(model.config())},
                           {"labels", label_vocabulary()},
                           {"stats", to_json(stats)},
                           {"window", to_json(window)},
                           {"tensors", table},
                           {"metadata", metadata}};
  const std::string id = sha256_hex(header.dump() + payload).substr(0, 16);
  header["model_id"] = id;
  if (model_id) *model_id = id;

  const std::string h = header.dump();
  std::string out(kMagic, sizeof(kMagic));
  put<std::uint32_t>(out, kCheckpointVersion);
  put<std::uint64_t>(out, h.size());
  out += h;
  out += payload;
  return out;
}

Checkpoint deserialize_checkpoint(const std::string& bytes) {
  if (bytes.size() < sizeof(kMagic) || std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0) {
    throw std::runtime_error("checkpoint: bad magic");
  }
  std::size_t at = sizeof(kMagic);
  const auto version = get<std::uint32_t>(bytes, at);
  if (version != kCheckpointVersion) {
    throw std::runtime_error("checkpoint: unsupported version " + std::to_string(version));
  }
  const auto hlen = get<std::uint64_t>(bytes, at);
  if (at + hlen > bytes.size()) throw std::runtime_error("checkpoint: truncated header");
  const auto header = nlohmann::json::parse(bytes.substr(at, hlen));
  at += hlen;

  check_label_vocabulary(header.at("labels"));
  Checkpoint ck;
  ck.model = Model<float>(model_config_from_json(header.at("model_config")));
  ck.stats = norm_stats_from_json(header.at("stats"));
  ck.window = window_config_from_json(header.at("window"));
  ck.metadata = header.value("metadata", nlohmann::json::object());
  ck.model_id = header.at("model_id").get<std::string>();

  std::map<std::string, Tensor> by_name;
  for (auto& t : tensors_of(ck.model)) by_name.emplace(t.name, t);
  std::size_t filled = 0;
  for (const auto& entry : header.at("tensors")) {
    const std::string name = entry.at("name");
    const auto count = entry.at("count").get<std::size_t>();
    auto it = by_name.find(name);
    if (it == by_name.end()) throw std::runtime_error("checkpoint: unexpected tensor " + name);
    if (it->second.data->size() != count) {
      throw std::runtime_error("checkpoint: tensor " + name + " has the wrong size");
    }
    if (at + count * sizeof(float) > bytes.size()) {
      throw std::runtime_error("checkpoint: truncated tensor data");
    }
    std::memcpy(it->second.data->data(), bytes.data() + at, count * sizeof(float));
    at += count * sizeof(float);
    ++filled;
  }
  std::size_t expected = 0;
  for (const auto& [name, t] : by_name) expected += t.data->empty() ? 0 : 1;
  if (filled != expected) throw std::runtime_error("checkpoint: missing tensors");
  if (at != bytes.size()) throw std::runtime_error("checkpoint: trailing bytes");
  return ck;
}

std::string save_checkpoint(const std::filesystem::path& path, Model<float>& model,
                            const NormalizationStats& stats, const WindowConfig& window,
                            const nlohmann::json& metadata) {
  std::string id;
  write_file_atomic(path, serialize_checkpoint(model, stats, window, metadata, &id));
  return id;
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  try {
    return deserialize_checkpoint(read_file(path));
  } catch (const std::exception& e) {
    throw std::runtime_error(path.string() + ": " + e.what());
  }
}

}  // namespace wip
