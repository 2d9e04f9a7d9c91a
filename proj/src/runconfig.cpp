#include "mntp/runconfig.hpp"

#include <fstream>

namespace mntp {

namespace {

using nlohmann::ordered_json;

template <class T>
void take(ordered_json& j, const std::string& where, const char* key, T& out) {
  auto it = j.find(key);
  if (it == j.end()) return;
  try {
    out = it->get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ArgumentError(where + "." + key + ": " + e.what());
  }
  j.erase(it);
}

void expect_empty(const ordered_json& j, const std::string& where) {
  if (j.empty()) return;
  std::string keys;
  for (const auto& [k, v] : j.items()) {
    if (!keys.empty()) keys += ", ";
    keys += k;
  }
  throw ArgumentError("unknown key(s) in " + where + ": " + keys);
}

ordered_json as_object(const ordered_json& j, const std::string& where) {
  if (!j.is_object())
    throw ArgumentError(where + " must be a JSON object");
  return j;
}

}  // namespace

ordered_json to_json(const ModelConfig& cfg) {
  return ordered_json{{"layers", cfg.layers},
                      {"hidden", cfg.hidden},
                      {"heads", cfg.heads},
                      {"mlp_ratio", cfg.mlp_ratio},
                      {"max_seq", cfg.max_seq},
                      {"token_dim", cfg.token_dim},
                      {"cond_len", cfg.cond_len},
                      {"cond_dim", cfg.cond_dim},
                      {"target_pos_emb", cfg.target_pos_emb}};
}

ModelConfig model_config_from_json(const ordered_json& j,
                                   const std::string& where) {
  ordered_json rest = as_object(j, where);
  ModelConfig cfg;
  std::string preset;
  take(rest, where, "preset", preset);
  if (!preset.empty()) cfg = ModelConfig::preset(preset);
  take(rest, where, "layers", cfg.layers);
  take(rest, where, "hidden", cfg.hidden);
  take(rest, where, "heads", cfg.heads);
  take(rest, where, "mlp_ratio", cfg.mlp_ratio);
  take(rest, where, "max_seq", cfg.max_seq);
  take(rest, where, "token_dim", cfg.token_dim);
  take(rest, where, "cond_len", cfg.cond_len);
  take(rest, where, "cond_dim", cfg.cond_dim);
  take(rest, where, "target_pos_emb", cfg.target_pos_emb);
  expect_empty(rest, where);
  return cfg;
}

ordered_json to_json(const HeadConfig& cfg) {
  return ordered_json{{"token_dim", cfg.token_dim},
                      {"z_dim", cfg.z_dim},
                      {"width", cfg.width},
                      {"blocks", cfg.blocks},
                      {"time_dim", cfg.time_dim}};
}

HeadConfig head_config_from_json(const ordered_json& j,
                                 const std::string& where) {
  ordered_json rest = as_object(j, where);
  HeadConfig cfg;
  take(rest, where, "token_dim", cfg.token_dim);
  take(rest, where, "z_dim", cfg.z_dim);
  take(rest, where, "width", cfg.width);
  take(rest, where, "blocks", cfg.blocks);
  take(rest, where, "time_dim", cfg.time_dim);
  expect_empty(rest, where);
  return cfg;
}

ordered_json to_json(const TrainConfig& cfg) {
  return ordered_json{{"task", cfg.task},
                      {"schedule", cfg.schedule},
                      {"strategy", cfg.strategy},
                      {"predict", cfg.predict},
                      {"attention", cfg.attention},
                      {"target_pos_emb", cfg.target_pos_emb},
                      {"batch", cfg.batch},
                      {"steps", cfg.steps},
                      {"lr", cfg.lr},
                      {"weight_decay", cfg.weight_decay},
                      {"beta1", cfg.beta1},
                      {"beta2", cfg.beta2},
                      {"adam_eps", cfg.adam_eps},
                      {"cond_dropout", cfg.cond_dropout},
                      {"seed", cfg.seed},
                      {"diffusion_T", cfg.diffusion_T},
                      {"warmstart_task", cfg.warmstart_task},
                      {"warmstart_steps", cfg.warmstart_steps}};
}

TrainConfig train_config_from_json(const ordered_json& j,
                                   const std::string& where) {
  ordered_json rest = as_object(j, where);
  TrainConfig cfg;
  std::string row;
  take(rest, where, "ablation_row", row);
  int64_t steps = cfg.steps;
  take(rest, where, "steps", steps);
  if (!row.empty()) {
    if (row.size() != 1)
      throw ArgumentError(where + ".ablation_row must be a single letter");
    cfg = make_ablation_config(row[0], steps);
  }
  cfg.steps = steps;
  take(rest, where, "task", cfg.task);
  take(rest, where, "schedule", cfg.schedule);
  take(rest, where, "strategy", cfg.strategy);
  take(rest, where, "predict", cfg.predict);
  take(rest, where, "attention", cfg.attention);
  take(rest, where, "target_pos_emb", cfg.target_pos_emb);
  take(rest, where, "batch", cfg.batch);
  take(rest, where, "lr", cfg.lr);
  take(rest, where, "weight_decay", cfg.weight_decay);
  take(rest, where, "beta1", cfg.beta1);
  take(rest, where, "beta2", cfg.beta2);
  take(rest, where, "adam_eps", cfg.adam_eps);
  take(rest, where, "cond_dropout", cfg.cond_dropout);
  take(rest, where, "seed", cfg.seed);
  take(rest, where, "diffusion_T", cfg.diffusion_T);
  take(rest, where, "warmstart_task", cfg.warmstart_task);
  take(rest, where, "warmstart_steps", cfg.warmstart_steps);
  expect_empty(rest, where);
  return cfg;
}

RunConfig run_config_from_json(const ordered_json& j) {
  ordered_json rest = as_object(j, "run");
  RunConfig cfg;
  auto model = rest.find("model");
  if (model == rest.end())
    throw ArgumentError("run config needs a \"model\" section");
  cfg.model = model_config_from_json(*model, "model");
  rest.erase(model);
  auto head = rest.find("head");
  if (head != rest.end()) {
    cfg.head = head_config_from_json(*head, "head");
    rest.erase(head);
  }
  auto train = rest.find("train");
  if (train != rest.end()) {
    cfg.train = train_config_from_json(*train, "train");
    rest.erase(train);
  }
  expect_empty(rest, "run");
  // The head always rides on the decoder's representation.
  cfg.head.token_dim = cfg.model.token_dim;
  cfg.head.z_dim = cfg.model.hidden;
  cfg.model.target_pos_emb = cfg.train.target_pos_emb;
  cfg.model.validate();
  cfg.train.validate();
  return cfg;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ArgumentError("cannot open config file '" + path + "'");
  ordered_json j;
  try {
    j = ordered_json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ArgumentError("config file '" + path + "': " + e.what());
  }
  return run_config_from_json(j);
}

ordered_json to_json(const RunConfig& cfg) {
  return ordered_json{{"model", to_json(cfg.model)},
                      {"head", to_json(cfg.head)},
                      {"train", to_json(cfg.train)}};
}

}  // namespace mntp
