#pragma once

// JSON views of the configuration structs. Parsing is strict: a key the
// struct does not define is an error, so typos fail fast instead of
// silently training the wrong model.

#include <string>

#include <json.hpp>

#include "mntp/model.hpp"
#include "mntp/trainer.hpp"

namespace mntp {

nlohmann::ordered_json to_json(const ModelConfig& cfg);
nlohmann::ordered_json to_json(const HeadConfig& cfg);
nlohmann::ordered_json to_json(const TrainConfig& cfg);

ModelConfig model_config_from_json(const nlohmann::ordered_json& j,
                                   const std::string& where);
HeadConfig head_config_from_json(const nlohmann::ordered_json& j,
                                 const std::string& where);
TrainConfig train_config_from_json(const nlohmann::ordered_json& j,
                                   const std::string& where);

// A complete training run: model geometry, head geometry, training recipe.
// Only "model" is mandatory; the others fall back to defaults. The head's
// token_dim and z_dim always follow the model.
struct RunConfig {
  ModelConfig model;
  HeadConfig head;
  TrainConfig train;
};

RunConfig run_config_from_json(const nlohmann::ordered_json& j);
RunConfig load_run_config(const std::string& path);
nlohmann::ordered_json to_json(const RunConfig& cfg);

}  // namespace mntp
