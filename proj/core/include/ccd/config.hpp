#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include <json.hpp>

#include "ccd/network.hpp"
#include "ccd/phantom.hpp"
#include "ccd/trainer.hpp"

namespace ccd {

/// Run configuration file. Every section is optional and missing keys keep
/// their defaults; unknown keys are rejected.
///
///   {"net": {...}, "train": {..., "loss_weights": {"w_r": 1, "w_c": 0.2}},
///    "phantom": {...}, "paths": {"manifest": "...", "out": "..."}}
///
/// Relative paths resolve against the directory holding the file.
struct RunConfig {
  NetConfig net;
  TrainConfig train;
  PhantomConfig phantom;
  std::optional<std::filesystem::path> manifest;
  std::optional<std::filesystem::path> out;
};

nlohmann::json to_json(const TrainConfig& config);
TrainConfig train_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const PhantomConfig& config);
PhantomConfig phantom_config_from_json(const nlohmann::json& j);

nlohmann::json to_json(const RunConfig& config);
RunConfig run_config_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
RunConfig load_run_config(const std::filesystem::path& path);

}  // namespace ccd
