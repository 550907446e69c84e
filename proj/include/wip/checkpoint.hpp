#pragma once

// Checkpoint file:
//   8-byte magic "WIPCKPT1", u32 format version, u64 header length,
//   JSON header (model config, label vocabulary, normalisation stats,
//   window config, tensor table, metadata, model id),
//   then every tensor as little-endian float32 in table order.

#include <filesystem>
#include <string>

#include <json.hpp>

#include "wip/dataset.hpp"
#include "wip/model.hpp"

namespace wip {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  Model<float> model;
  NormalizationStats stats;
  WindowConfig window;
  nlohmann::json metadata;
  std::string model_id;
};

std::string serialize_checkpoint(Model<float>& model, const NormalizationStats& stats,
                                 const WindowConfig& window, const nlohmann::json& metadata,
                                 std::string* model_id = nullptr);
Checkpoint deserialize_checkpoint(const std::string& bytes);

// Atomic write; returns the model id.
std::string save_checkpoint(const std::filesystem::path& path, Model<float>& model,
                            const NormalizationStats& stats, const WindowConfig& window,
                            const nlohmann::json& metadata = nlohmann::json::object());
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace wip
