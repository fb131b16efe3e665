#pragma once

#include <string>
#include <utility>

#include "json.hpp"

#include "cheatt/model.hpp"

namespace cheatt {

// Checkpoint document: {"format_version": 1, "config": {...}, "params":
// {name: {rows, cols, data:[...]}}}. Doubles are written in shortest
// round-trip form, so load(save(x)) is value-identical.
nlohmann::json config_to_json(const ModelConfig& cfg);
ModelConfig config_from_json(const nlohmann::json& j);

nlohmann::json checkpoint_to_json(const ModelConfig& cfg, const ParamStore& params);
std::pair<ModelConfig, ParamStore> checkpoint_from_json(const nlohmann::json& j);

void save_checkpoint(const std::string& path, const ModelConfig& cfg, const ParamStore& params);
std::pair<ModelConfig, ParamStore> load_checkpoint(const std::string& path);

}  // namespace cheatt
