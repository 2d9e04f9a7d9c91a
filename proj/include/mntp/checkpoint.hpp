#pragma once

// Checkpoints are a pair of files: <prefix>.manifest.json describing the
// run, and <prefix>.blob holding raw little-endian float32 data in registry
// order (parameters first, then optimizer moments when present). Saving the
// same state twice produces byte-identical files.

#include <cstdint>
#include <string>
#include <vector>

#include "mntp/model.hpp"
#include "mntp/trainer.hpp"

namespace mntp {

struct Checkpoint {
  int64_t step = 0;
  TrainConfig train;
  ModelState<float> state;
  bool has_optimizer = false;
  int64_t opt_t = 0;
  std::vector<std::vector<float>> opt_m, opt_v;  // registry order

  // Restores moments and step count into a fresh optimizer.
  void restore_optimizer(AdamW& opt) const;
};

void save_checkpoint(const std::string& prefix, const ModelState<float>& state,
                     const TrainConfig& train, int64_t step,
                     const AdamW* opt = nullptr);

Checkpoint load_checkpoint(const std::string& prefix);

}  // namespace mntp
