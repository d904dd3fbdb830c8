#pragma once

#include <string>

#include "core/denoise.hpp"
#include "core/model.hpp"
#include "core/synthdata.hpp"
#include "core/train.hpp"

#include <nlohmann/json.hpp>

namespace cdt {

// Strict JSON (de)serialization: unknown keys are rejected so typos cannot
// silently fall back to defaults. Every run writes its resolved config next
// to its outputs via the to_json side.

nlohmann::json to_json(const ShiftSpec& spec);
ShiftSpec shift_spec_from_json(const nlohmann::json& j);

nlohmann::json to_json(const ModelConfig& cfg);
ModelConfig model_config_from_json(const nlohmann::json& j);

nlohmann::json to_json(const TrainConfig& cfg);
TrainConfig train_config_from_json(const nlohmann::json& j);

nlohmann::json to_json(const GmmSpec& spec);
GmmSpec gmm_spec_from_json(const nlohmann::json& j);

nlohmann::json parse_json(const std::string& text, const std::string& what);
nlohmann::json load_json_file(const std::string& path);
void save_json_file(const nlohmann::json& j, const std::string& path);

// Applies "dotted.path=value" overrides onto a JSON document; values parse
// as JSON when possible and fall back to strings.
void apply_override(nlohmann::json& j, const std::string& assignment);

}  // namespace cdt
