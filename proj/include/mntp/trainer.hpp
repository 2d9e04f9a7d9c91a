#pragma once

// Training: task profiles, stateless per-step batch assembly, AdamW, and the
// step loop. Every random draw is keyed by (seed, purpose, step, example),
// so a resumed run replays exactly the stream an uninterrupted run would.

#include <cstdint>
#include <functional>
#include <ostream>
#include <string>
#include <vector>

#include "mntp/cvtk.hpp"
#include "mntp/diffusion.hpp"
#include "mntp/masking.hpp"
#include "mntp/model.hpp"

namespace mntp {

enum class PredictMode { next, skip, masked };

PredictMode predict_mode_from(const std::string& name);
std::string to_string(PredictMode m);
AttentionMode attention_from(const std::string& name);
std::string to_string(AttentionMode m);

struct TrainConfig {
  std::string task = "mntp";            // ntp | mntp | mar
  std::string schedule = "mixture-default";  // masking-ratio preset
  std::string strategy = "drop";        // drop | zero | gaussian
  std::string predict = "skip";         // next | skip | masked
  std::string attention = "causal";     // causal | bidirectional
  bool target_pos_emb = true;
  int batch = 64;
  int64_t steps = 0;
  double lr = 1e-4;
  double weight_decay = 0.02;
  double beta1 = 0.9;
  double beta2 = 0.95;
  double adam_eps = 1e-8;
  double cond_dropout = 0.1;
  uint64_t seed = 0;
  int diffusion_T = 1000;  // forward-process steps of the noise schedule
  // Two-phase runs: the first warmstart_steps use warmstart_task's profile,
  // the rest use the main task.
  std::string warmstart_task;
  int64_t warmstart_steps = 0;

  void validate() const;
};

// Resolved behavior of one step (the warmstart switch already applied).
struct StepProfile {
  bool mask = true;  // false: no corruption, every token stays visible
  MaskStrategy strategy = MaskStrategy::drop;
  MaskSchedule schedule;
  PredictMode predict = PredictMode::skip;
  AttentionMode attention = AttentionMode::causal;
};

StepProfile step_profile(const TrainConfig& cfg, int64_t step);

// Ablation table rows a through k. Rows only set what they change; batch
// size, rates and seeds stay at the caller's values.
TrainConfig make_ablation_config(char row, int64_t steps);

// Everything one optimization step consumes. Assembled from plain data so
// the float trainer and the double-precision gradient check share one path.
struct BatchPlan {
  std::vector<SeqInput> seqs;
  AttentionMode attention = AttentionMode::causal;
  int token_slots = 0;           // padded token width the encoder produces
  std::vector<int> slot_rows;    // loss slots, as row indices into z
  std::vector<float> targets;    // slots * token_dim, clean tokens
  std::vector<int> ts;           // slots, diffusion times in [1, T]
  std::vector<float> eps;        // slots * token_dim, forward noise
  std::vector<int64_t> records;  // drawn record ids, for diagnostics
  int slots() const { return static_cast<int>(ts.size()); }
};

BatchPlan plan_step(const ModelConfig& mc, const TrainConfig& cfg,
                    const NoiseSchedule& sched,
                    const std::vector<CvtkRecord>& data, int64_t step);

// Pooled mean over every loss slot of the squared noise-prediction error
// (summed over token dimensions). Differentiable; shared by training and
// the finite-difference acceptance check.
template <class S>
Tensor<S> batch_loss(const ModelState<S>& model, const NoiseSchedule& sched,
                     const BatchPlan& plan) {
  if (plan.slots() == 0) return Tensor<S>::scalar(S(0));
  EncodeOut<S> out = encode_batch(model, plan.seqs, plan.attention);
  if (out.token_slots != plan.token_slots)
    throw DimensionError("batch_loss: encoder layout does not match the plan");
  Tensor<S> z = gather_rows(out.z, plan.slot_rows);
  std::vector<S> targets(plan.targets.begin(), plan.targets.end());
  std::vector<S> eps(plan.eps.begin(), plan.eps.end());
  Tensor<S> per_slot =
      head_loss_slots(model.head, sched, z, targets, plan.ts, eps);
  return mean(per_slot);
}

class AdamW {
 public:
  AdamW(double lr, double beta1, double beta2, double eps,
        double weight_decay);

  // One decoupled-weight-decay update from the gradients currently held by
  // the parameters. Moment buffers are created on first use.
  void step(const std::vector<std::pair<std::string, Tensor<float>>>& params);

  int64_t t() const { return t_; }
  void set_t(int64_t t) { t_ = t; }
  std::vector<std::vector<float>>& moments_m() { return m_; }
  std::vector<std::vector<float>>& moments_v() { return v_; }
  const std::vector<std::vector<float>>& moments_m() const { return m_; }
  const std::vector<std::vector<float>>& moments_v() const { return v_; }

 private:
  double lr_, b1_, b2_, eps_, wd_;
  int64_t t_ = 0;
  std::vector<std::vector<float>> m_, v_;
};

class Trainer {
 public:
  // Builds its cosine noise schedule from cfg.diffusion_T.
  Trainer(ModelState<float> model, TrainConfig cfg);

  // One step: assemble, forward, backward, update. Returns the loss.
  // Throws NumericError naming the step if the loss is not finite.
  double step_once(const std::vector<CvtkRecord>& data, int64_t step);

  // Steps [start_step, cfg.steps). Writes "step,loss" lines to loss_csv
  // when given (with a header when starting from step 0).
  void run(const std::vector<CvtkRecord>& data, int64_t start_step,
           std::ostream* loss_csv,
           const std::function<void(int64_t, double)>& on_step = {});

  ModelState<float>& model() { return model_; }
  const ModelState<float>& model() const { return model_; }
  AdamW& optimizer() { return opt_; }
  const TrainConfig& config() const { return cfg_; }
  const NoiseSchedule& schedule() const { return sched_; }

 private:
  ModelState<float> model_;
  TrainConfig cfg_;
  NoiseSchedule sched_;
  AdamW opt_;
};

// Shape checks shared by training and evaluation entry points.
void check_dataset(const ModelConfig& mc, const std::vector<CvtkRecord>& data);

}  // namespace mntp
