#pragma once

#include <filesystem>
#include <string>

#include "json.hpp"

#include "lgt/layers.hpp"
#include "lgt/trainer.hpp"

namespace lgt {

/// Binary model file; field order is listed in README.md.
void save_checkpoint(const LayerStack& stack, const std::filesystem::path& path);
LayerStack load_checkpoint(const std::filesystem::path& path);

nlohmann::json to_json(const CollapseReport& r);
nlohmann::json to_json(const StageReport& r);
nlohmann::json to_json(const TrainReport& r);
nlohmann::json to_json(const TrainConfig& c);

}  // namespace lgt
