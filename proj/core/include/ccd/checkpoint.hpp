#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include <json.hpp>

#include "ccd/network.hpp"

namespace ccd {

inline constexpr int kCheckpointVersion = 1;

// Checkpoint layout:
//   8 bytes  magic "CCDCKPT\n"
//   8 bytes  header length, unsigned little-endian
//   header   UTF-8 JSON: format_version, config, params/buffers tables
//            ({name, offset, shape}), param_count, buffer_count
//   payload  param_count then buffer_count IEEE-754 doubles, little-endian

std::string serialize_checkpoint(const ModelParams& params);
ModelParams deserialize_checkpoint(std::string_view bytes);

void save_checkpoint(const ModelParams& params, const std::filesystem::path& path);
ModelParams load_checkpoint(const std::filesystem::path& path);

nlohmann::json to_json(const NetConfig& config);
/// Rejects unknown keys; missing keys keep their defaults.
NetConfig net_config_from_json(const nlohmann::json& j);

}  // namespace ccd
