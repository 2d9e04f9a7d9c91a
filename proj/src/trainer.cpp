#include "mntp/trainer.hpp"

#include <cmath>
#include <numeric>

namespace mntp {

PredictMode predict_mode_from(const std::string& name) {
  if (name == "next") return PredictMode::next;
  if (name == "skip") return PredictMode::skip;
  if (name == "masked") return PredictMode::masked;
  throw ArgumentError("unknown predict mode '" + name + "'");
}

std::string to_string(PredictMode m) {
  switch (m) {
    case PredictMode::next: return "next";
    case PredictMode::skip: return "skip";
    case PredictMode::masked: return "masked";
  }
  throw ArgumentError("corrupt predict mode");
}

AttentionMode attention_from(const std::string& name) {
  if (name == "causal") return AttentionMode::causal;
  if (name == "bidirectional") return AttentionMode::bidirectional;
  throw ArgumentError("unknown attention mode '" + name + "'");
}

std::string to_string(AttentionMode m) {
  return m == AttentionMode::causal ? "causal" : "bidirectional";
}

namespace {

void apply_task(const std::string& task, const TrainConfig& cfg,
                StepProfile& p) {
  if (task == "ntp") {
    p.mask = false;
    p.strategy = MaskStrategy::none;
    p.predict = PredictMode::next;
    p.attention = AttentionMode::causal;
  } else if (task == "mntp") {
    p.mask = true;
    p.strategy = mask_strategy_from(cfg.strategy);
    p.schedule = schedule_preset(cfg.schedule);
    p.predict = predict_mode_from(cfg.predict);
    p.attention = attention_from(cfg.attention);
  } else if (task == "mar") {
    p.mask = true;
    p.strategy = MaskStrategy::zero;
    p.schedule = schedule_preset(cfg.schedule);
    p.predict = PredictMode::masked;
    p.attention = AttentionMode::bidirectional;
  } else {
    throw ArgumentError("unknown task '" + task + "'");
  }
  if (p.mask && p.strategy == MaskStrategy::none)
    throw ArgumentError("masking tasks need a drop, zero or gaussian "
                        "strategy");
  // Skip prediction walks the kept list, so tokens must actually be removed;
  // in-place prediction needs the masked tokens to still occupy their slots.
  if (p.predict == PredictMode::skip && p.strategy != MaskStrategy::drop)
    throw ArgumentError("skip prediction requires the drop strategy");
  if (p.predict == PredictMode::masked && p.strategy == MaskStrategy::drop)
    throw ArgumentError("masked prediction requires an in-place strategy");
  // Full attention over next/skip targets would let slots see their answer.
  if (p.attention == AttentionMode::bidirectional &&
      p.predict != PredictMode::masked)
    throw ArgumentError("bidirectional attention requires masked prediction");
}

}  // namespace

void TrainConfig::validate() const {
  if (batch < 1) throw ArgumentError("train: batch must be positive");
  if (steps < 0) throw ArgumentError("train: steps must be non-negative");
  if (lr <= 0) throw ArgumentError("train: lr must be positive");
  if (weight_decay < 0)
    throw ArgumentError("train: weight_decay must be non-negative");
  if (beta1 < 0 || beta1 >= 1 || beta2 < 0 || beta2 >= 1)
    throw ArgumentError("train: betas must lie in [0, 1)");
  if (adam_eps <= 0) throw ArgumentError("train: adam_eps must be positive");
  if (cond_dropout < 0 || cond_dropout > 1)
    throw ArgumentError("train: cond_dropout must lie in [0, 1]");
  if (diffusion_T < 1)
    throw ArgumentError("train: diffusion_T must be positive");
  if (warmstart_steps < 0)
    throw ArgumentError("train: warmstart_steps must be non-negative");
  if (!warmstart_task.empty() && warmstart_steps == 0)
    throw ArgumentError("train: warmstart_task set but warmstart_steps is 0");
  // Resolve both phases now so bad combinations fail before training.
  StepProfile p;
  apply_task(task, *this, p);
  if (!warmstart_task.empty()) apply_task(warmstart_task, *this, p);
}

StepProfile step_profile(const TrainConfig& cfg, int64_t step) {
  StepProfile p;
  bool warm = !cfg.warmstart_task.empty() && step < cfg.warmstart_steps;
  apply_task(warm ? cfg.warmstart_task : cfg.task, cfg, p);
  return p;
}

TrainConfig make_ablation_config(char row, int64_t steps) {
  TrainConfig c;
  c.steps = steps;
  switch (row) {
    case 'a':
      c.task = "ntp";
      c.target_pos_emb = false;
      break;
    case 'b':
      c.task = "ntp";
      c.target_pos_emb = false;
      c.warmstart_task = "mar";
      c.schedule = "mar-range";
      c.warmstart_steps = steps / 2;
      break;
    case 'c':
      c.strategy = "zero", c.schedule = "fixed-0.7", c.predict = "next";
      c.target_pos_emb = false;
      break;
    case 'd':
      c.strategy = "gaussian", c.schedule = "uniform", c.predict = "next";
      c.target_pos_emb = false;
      break;
    case 'e':
      c.strategy = "drop", c.schedule = "mixture-default", c.predict = "next";
      c.target_pos_emb = false;
      break;
    case 'f':
      c.strategy = "zero", c.schedule = "mixture-default", c.predict = "next";
      c.target_pos_emb = false;
      break;
    case 'g':
    case 'j':
      break;  // the default configuration
    case 'h':
      c.schedule = "mar-range";
      break;
    case 'i':
      c.target_pos_emb = false;
      break;
    case 'k':
      c.task = "mar";
      c.schedule = "mar-range";
      c.strategy = "zero";
      c.predict = "masked";
      c.attention = "bidirectional";
      c.target_pos_emb = false;
      break;
    default:
      throw ArgumentError(std::string("unknown ablation row '") + row +
                          "' (expected a through k)");
  }
  c.validate();
  return c;
}

void check_dataset(const ModelConfig& mc, const std::vector<CvtkRecord>& data) {
  if (data.empty()) throw ArgumentError("dataset is empty");
  for (const auto& rec : data) {
    if (static_cast<int>(rec.token_dim) != mc.token_dim)
      throw DimensionError("record token_dim " +
                           std::to_string(rec.token_dim) +
                           " does not match model token_dim " +
                           std::to_string(mc.token_dim));
    if (rec.token_count < 1 ||
        static_cast<int>(rec.token_count) > mc.max_seq)
      throw RangeError("record length " + std::to_string(rec.token_count) +
                       " outside [1, " + std::to_string(mc.max_seq) + "]");
    if (mc.cond_len > 0 &&
        static_cast<int64_t>(rec.cond_len) * rec.cond_dim <
            static_cast<int64_t>(mc.cond_len) * mc.cond_dim)
      throw DimensionError("record condition too short for the model prefix");
  }
}

BatchPlan plan_step(const ModelConfig& mc, const TrainConfig& cfg,
                    const NoiseSchedule& sched,
                    const std::vector<CvtkRecord>& data, int64_t step) {
  if (data.empty()) throw ArgumentError("train: empty dataset");
  StepProfile prof = step_profile(cfg, step);
  BatchPlan plan;
  plan.attention = prof.attention;
  uint64_t us = static_cast<uint64_t>(step);

  Rng batch_rng(cfg.seed, "batch", us);
  plan.records.resize(cfg.batch);
  for (auto& id : plan.records)
    id = static_cast<int64_t>(batch_rng.below(data.size()));

  int td = mc.token_dim;
  // (slot offset from the start slot, original target position) per example.
  std::vector<std::vector<std::pair<int, int>>> marks(cfg.batch);
  int max_m = 0;
  for (int b = 0; b < cfg.batch; ++b) {
    const CvtkRecord& rec = data[plan.records[b]];
    int n = static_cast<int>(rec.token_count);
    SeqInput q;
    q.n = n;
    if (mc.cond_len > 0) {
      Rng drop_rng(cfg.seed, "cond-drop", us, static_cast<uint64_t>(b));
      q.fake_cond = drop_rng.uniform() < cfg.cond_dropout;
      if (!q.fake_cond)
        q.cond = fit_condition(rec.cond, mc.cond_len, mc.cond_dim);
    }

    MaskPlan mask;
    if (prof.mask) {
      Rng mask_rng(cfg.seed, "mask", us, static_cast<uint64_t>(b));
      double ratio = sample_ratio(prof.schedule, mask_rng);
      mask = sample_plan(n, ratio, mask_rng);
    } else {
      mask = plan_from_keep(std::vector<uint8_t>(n, 1));
    }

    if (prof.strategy == MaskStrategy::drop && prof.mask) {
      int m = static_cast<int>(mask.kept.size());
      q.content_idx = mask.kept;
      q.tokens.resize(static_cast<size_t>(m) * td);
      for (int j = 0; j < m; ++j)
        std::copy_n(rec.tokens.data() + static_cast<size_t>(mask.kept[j]) * td,
                    td, q.tokens.data() + static_cast<size_t>(j) * td);
    } else {
      q.content_idx.resize(n);
      std::iota(q.content_idx.begin(), q.content_idx.end(), 0);
      q.tokens = rec.tokens;
      if (prof.mask && prof.strategy == MaskStrategy::zero) {
        for (int pos : mask.masked)
          std::fill_n(q.tokens.data() + static_cast<size_t>(pos) * td, td,
                      0.0f);
      } else if (prof.mask && prof.strategy == MaskStrategy::gaussian) {
        Rng crng(cfg.seed, "corrupt", us, static_cast<uint64_t>(b));
        for (int pos : mask.masked)
          for (int c = 0; c < td; ++c)
            q.tokens[static_cast<size_t>(pos) * td + c] =
                static_cast<float>(crng.gaussian());
      }
    }

    int m = static_cast<int>(q.content_idx.size());
    q.target_idx.resize(m + 1);
    auto& lm = marks[b];
    switch (prof.predict) {
      case PredictMode::skip: {
        q.target_idx[0] = first_kept_or_sentinel(mask);
        std::vector<int> st = skip_targets(mask);
        std::copy(st.begin(), st.end(), q.target_idx.begin() + 1);
        break;
      }
      case PredictMode::next: {
        q.target_idx[0] = 0;
        for (int j = 0; j < m; ++j) q.target_idx[j + 1] = q.content_idx[j] + 1;
        break;
      }
      case PredictMode::masked: {
        q.target_idx[0] = n;  // the start slot predicts nothing in place
        for (int j = 0; j < m; ++j) q.target_idx[j + 1] = q.content_idx[j];
        break;
      }
    }
    if (prof.predict == PredictMode::masked) {
      for (int j = 0; j < m; ++j)
        if (!mask.keep[q.content_idx[j]])
          lm.emplace_back(j + 1, q.content_idx[j]);
    } else {
      for (int o = 0; o <= m; ++o)
        if (q.target_idx[o] < n) lm.emplace_back(o, q.target_idx[o]);
    }
    max_m = std::max(max_m, m);
    plan.seqs.push_back(std::move(q));
  }

  plan.token_slots = max_m;
  int slots_per_seq = mc.cond_len + 1 + max_m;
  for (int b = 0; b < cfg.batch; ++b) {
    const CvtkRecord& rec = data[plan.records[b]];
    Rng trng(cfg.seed, "diffuse-t", us, static_cast<uint64_t>(b));
    Rng erng(cfg.seed, "diffuse-eps", us, static_cast<uint64_t>(b));
    for (auto [off, tpos] : marks[b]) {
      plan.slot_rows.push_back(b * slots_per_seq + mc.cond_len + off);
      const float* src = rec.tokens.data() + static_cast<size_t>(tpos) * td;
      plan.targets.insert(plan.targets.end(), src, src + td);
      plan.ts.push_back(1 + static_cast<int>(trng.below(sched.T)));
      for (int c = 0; c < td; ++c)
        plan.eps.push_back(static_cast<float>(erng.gaussian()));
    }
  }
  return plan;
}

// ---------------------------------------------------------------------------

AdamW::AdamW(double lr, double beta1, double beta2, double eps,
             double weight_decay)
    : lr_(lr), b1_(beta1), b2_(beta2), eps_(eps), wd_(weight_decay) {}

void AdamW::step(
    const std::vector<std::pair<std::string, Tensor<float>>>& params) {
  if (m_.empty()) {
    for (auto& [name, t] : params) {
      m_.emplace_back(t.size(), 0.0f);
      v_.emplace_back(t.size(), 0.0f);
    }
  }
  if (m_.size() != params.size())
    throw ArgumentError("optimizer state does not match the parameter list");
  ++t_;
  float c1 = static_cast<float>(1.0 - std::pow(b1_, static_cast<double>(t_)));
  float c2 = static_cast<float>(1.0 - std::pow(b2_, static_cast<double>(t_)));
  float b1 = static_cast<float>(b1_), b2 = static_cast<float>(b2_);
  float lr = static_cast<float>(lr_), eps = static_cast<float>(eps_);
  float wd = static_cast<float>(wd_);
  for (size_t i = 0; i < params.size(); ++i) {
    const Tensor<float>& p = params[i].second;
    if (static_cast<int64_t>(m_[i].size()) != p.size())
      throw DimensionError("optimizer moments for '" + params[i].first +
                           "' have the wrong size");
    const std::vector<float>& g = p.grad();
    std::vector<float>& w = p.vals_mut();
    float* m = m_[i].data();
    float* v = v_[i].data();
    for (int64_t j = 0; j < p.size(); ++j) {
      m[j] = b1 * m[j] + (1.0f - b1) * g[j];
      v[j] = b2 * v[j] + (1.0f - b2) * g[j] * g[j];
      float mhat = m[j] / c1;
      float vhat = v[j] / c2;
      w[j] -= lr * (mhat / (std::sqrt(vhat) + eps) + wd * w[j]);
    }
  }
}

// ---------------------------------------------------------------------------

Trainer::Trainer(ModelState<float> model, TrainConfig cfg)
    : model_(std::move(model)),
      cfg_(std::move(cfg)),
      sched_(NoiseSchedule::cosine(cfg_.diffusion_T)),
      opt_(cfg_.lr, cfg_.beta1, cfg_.beta2, cfg_.adam_eps,
           cfg_.weight_decay) {
  cfg_.validate();
  if (cfg_.target_pos_emb != model_.cfg.target_pos_emb)
    throw ArgumentError("train: target_pos_emb disagrees with the model");
}

double Trainer::step_once(const std::vector<CvtkRecord>& data, int64_t step) {
  BatchPlan plan = plan_step(model_.cfg, cfg_, sched_, data, step);
  if (plan.slots() == 0) return 0.0;  // nothing to learn from this draw
  Tensor<float> loss = batch_loss(model_, sched_, plan);
  double value = loss.item();
  if (!std::isfinite(value))
    throw NumericError("training diverged at step " + std::to_string(step) +
                       " (loss is not finite)");
  auto params = model_.named_params();
  for (auto& [name, t] : params) t.zero_grad();
  loss.backward();
  opt_.step(params);
  return value;
}

void Trainer::run(const std::vector<CvtkRecord>& data, int64_t start_step,
                  std::ostream* loss_csv,
                  const std::function<void(int64_t, double)>& on_step) {
  check_dataset(model_.cfg, data);
  if (loss_csv && start_step == 0) *loss_csv << "step,loss\n";
  for (int64_t s = start_step; s < cfg_.steps; ++s) {
    double loss = step_once(data, s);
    if (loss_csv) *loss_csv << s << "," << loss << "\n";
    if (on_step) on_step(s, loss);
  }
}

}  // namespace mntp
