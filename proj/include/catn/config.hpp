#pragma once

#include "json.hpp"

#include "catn/trainer.hpp"

namespace catn {

// Flat JSON whose keys are TrainConfig field names, with ArchConfig and
// LossWeights fields lifted to the top level.
nlohmann::json to_json(const TrainConfig& cfg);

// Overrides the fields present in `j`; unknown keys are rejected.
void apply_json(TrainConfig& cfg, const nlohmann::json& j);

TrainConfig config_from_json(const nlohmann::json& j);

nlohmann::json to_json(const ArchConfig& arch);
ArchConfig arch_from_json(const nlohmann::json& j);

}  // namespace catn
