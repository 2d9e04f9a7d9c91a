#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstring>
#include <sstream>

#include "mntp/codec.hpp"
#include "mntp/trainer.hpp"

using namespace mntp;

namespace {

ModelConfig train_model_cfg(bool tpe = true, int cond_len = 2) {
  ModelConfig cfg;
  cfg.layers = 1;
  cfg.hidden = 32;
  cfg.heads = 4;
  cfg.mlp_ratio = 2;
  cfg.max_seq = 8;
  cfg.token_dim = 4;
  cfg.cond_len = cond_len;
  cfg.cond_dim = cond_len > 0 ? 3 : 0;
  cfg.target_pos_emb = tpe;
  return cfg;
}

HeadConfig train_head_cfg(const ModelConfig& mc) {
  HeadConfig h;
  h.token_dim = mc.token_dim;
  h.z_dim = mc.hidden;
  h.width = 32;
  h.blocks = 1;
  h.time_dim = 8;
  return h;
}

std::vector<CvtkRecord> tiny_dataset(int count = 24, int len = 8) {
  GaussianArProcess proc =
      make_gaussian_ar_process(4, 3, 0.8, 0.5, 2, 3, 404);
  return sample_gaussian_ar_dataset(proc, count, len, 11);
}

TrainConfig small_train(const std::string& task = "mntp") {
  TrainConfig cfg;
  cfg.task = task;
  cfg.batch = 6;
  cfg.steps = 20;
  cfg.seed = 5;
  if (task == "mar") {
    cfg.schedule = "mar-range";
    cfg.strategy = "zero";
    cfg.predict = "masked";
    cfg.attention = "bidirectional";
    cfg.target_pos_emb = false;
  }
  if (task == "ntp") cfg.target_pos_emb = false;
  return cfg;
}

}  // namespace

TEST_CASE("task profiles resolve the knobs each task fixes") {
  TrainConfig cfg = small_train("ntp");
  StepProfile p = step_profile(cfg, 0);
  CHECK_FALSE(p.mask);
  CHECK(p.predict == PredictMode::next);
  CHECK(p.attention == AttentionMode::causal);

  cfg = small_train("mar");
  p = step_profile(cfg, 3);
  CHECK(p.mask);
  CHECK(p.strategy == MaskStrategy::zero);
  CHECK(p.predict == PredictMode::masked);
  CHECK(p.attention == AttentionMode::bidirectional);

  cfg = small_train();
  cfg.strategy = "drop";
  cfg.predict = "skip";
  p = step_profile(cfg, 7);
  CHECK(p.mask);
  CHECK(p.strategy == MaskStrategy::drop);
  CHECK(p.predict == PredictMode::skip);
}

TEST_CASE("warmstart switches the profile at the phase boundary") {
  TrainConfig cfg = small_train("ntp");
  cfg.warmstart_task = "mar";
  cfg.schedule = "mar-range";
  cfg.warmstart_steps = 10;
  StepProfile warm = step_profile(cfg, 9);
  CHECK(warm.predict == PredictMode::masked);
  CHECK(warm.attention == AttentionMode::bidirectional);
  StepProfile main = step_profile(cfg, 10);
  CHECK_FALSE(main.mask);
  CHECK(main.predict == PredictMode::next);
}

TEST_CASE("incoherent task combinations are rejected up front") {
  TrainConfig cfg = small_train();
  cfg.strategy = "zero";
  cfg.predict = "skip";  // skip needs dropped tokens
  CHECK_THROWS_AS(cfg.validate(), ArgumentError);
  cfg = small_train();
  cfg.strategy = "drop";
  cfg.predict = "masked";  // in-place prediction needs in-place corruption
  CHECK_THROWS_AS(cfg.validate(), ArgumentError);
  cfg = small_train();
  cfg.attention = "bidirectional";  // would reveal next-token answers
  CHECK_THROWS_AS(cfg.validate(), ArgumentError);
  cfg = small_train();
  cfg.task = "mlm";
  CHECK_THROWS_AS(cfg.validate(), ArgumentError);
  cfg = small_train();
  cfg.warmstart_task = "mar";  // warmstart_steps left at zero
  CHECK_THROWS_AS(cfg.validate(), ArgumentError);
}

TEST_CASE("ablation rows pin the documented configurations") {
  TrainConfig a = make_ablation_config('a', 100);
  CHECK(a.task == "ntp");
  CHECK_FALSE(a.target_pos_emb);

  TrainConfig b = make_ablation_config('b', 100);
  CHECK(b.task == "ntp");
  CHECK(b.warmstart_task == "mar");
  CHECK(b.warmstart_steps == 50);

  TrainConfig c = make_ablation_config('c', 100);
  CHECK(c.strategy == "zero");
  CHECK(c.schedule == "fixed-0.7");
  CHECK(c.predict == "next");

  TrainConfig d = make_ablation_config('d', 100);
  CHECK(d.strategy == "gaussian");
  CHECK(d.schedule == "uniform");

  TrainConfig e = make_ablation_config('e', 100);
  CHECK(e.strategy == "drop");
  CHECK(e.predict == "next");
  CHECK_FALSE(e.target_pos_emb);

  TrainConfig g = make_ablation_config('g', 100);
  CHECK(g.task == "mntp");
  CHECK(g.strategy == "drop");
  CHECK(g.schedule == "mixture-default");
  CHECK(g.predict == "skip");
  CHECK(g.target_pos_emb);

  TrainConfig h = make_ablation_config('h', 100);
  CHECK(h.schedule == "mar-range");
  CHECK(h.predict == "skip");

  TrainConfig i = make_ablation_config('i', 100);
  CHECK(i.predict == "skip");
  CHECK_FALSE(i.target_pos_emb);

  TrainConfig j = make_ablation_config('j', 100);
  CHECK(j.predict == g.predict);
  CHECK(j.schedule == g.schedule);

  TrainConfig k = make_ablation_config('k', 100);
  CHECK(k.task == "mar");
  CHECK(k.attention == "bidirectional");

  CHECK_THROWS_AS(make_ablation_config('z', 100), ArgumentError);
  CHECK_THROWS_AS(make_ablation_config('b', 0), ArgumentError);
}

TEST_CASE("plan assembly is a pure function of (config, data, step)") {
  ModelConfig mc = train_model_cfg();
  NoiseSchedule sched = NoiseSchedule::cosine(100);
  auto data = tiny_dataset();
  TrainConfig cfg = small_train();
  BatchPlan p1 = plan_step(mc, cfg, sched, data, 3);
  BatchPlan p2 = plan_step(mc, cfg, sched, data, 3);
  CHECK(p1.records == p2.records);
  CHECK(p1.ts == p2.ts);
  CHECK(p1.eps == p2.eps);
  CHECK(p1.slot_rows == p2.slot_rows);
  REQUIRE(p1.seqs.size() == p2.seqs.size());
  for (size_t i = 0; i < p1.seqs.size(); ++i) {
    CHECK(p1.seqs[i].tokens == p2.seqs[i].tokens);
    CHECK(p1.seqs[i].content_idx == p2.seqs[i].content_idx);
    CHECK(p1.seqs[i].target_idx == p2.seqs[i].target_idx);
  }
  BatchPlan p3 = plan_step(mc, cfg, sched, data, 4);
  CHECK(p1.records != p3.records);  // fresh draws each step
}

TEST_CASE("plain next-token plans shift targets by one position") {
  ModelConfig mc = train_model_cfg(false);
  NoiseSchedule sched = NoiseSchedule::cosine(100);
  auto data = tiny_dataset();
  TrainConfig cfg = small_train("ntp");
  cfg.cond_dropout = 0.0;
  BatchPlan plan = plan_step(mc, cfg, sched, data, 0);
  int n = 8, td = mc.token_dim;
  // Every sequence holds all n tokens and yields n loss slots.
  REQUIRE(plan.slots() == cfg.batch * n);
  int s = 0;
  for (int b = 0; b < cfg.batch; ++b) {
    const CvtkRecord& rec = data[plan.records[b]];
    const SeqInput& q = plan.seqs[b];
    REQUIRE(static_cast<int>(q.content_idx.size()) == n);
    CHECK(q.tokens == rec.tokens);
    CHECK(q.target_idx[0] == 0);
    for (int pos = 0; pos < n; ++pos, ++s) {
      // Slot `pos` of the layout (start slot first) predicts token `pos`.
      CHECK(std::memcmp(plan.targets.data() + s * td,
                        rec.tokens.data() + pos * td,
                        sizeof(float) * td) == 0);
      CHECK(plan.ts[s] >= 1);
      CHECK(plan.ts[s] <= sched.T);
    }
  }
}

TEST_CASE("drop plans keep only visible tokens and chain skip targets") {
  ModelConfig mc = train_model_cfg();
  NoiseSchedule sched = NoiseSchedule::cosine(100);
  auto data = tiny_dataset();
  TrainConfig cfg = small_train();
  BatchPlan plan = plan_step(mc, cfg, sched, data, 1);
  int td = mc.token_dim;
  int expected_slots = 0;
  for (int b = 0; b < cfg.batch; ++b) {
    const SeqInput& q = plan.seqs[b];
    const CvtkRecord& rec = data[plan.records[b]];
    int m = static_cast<int>(q.content_idx.size());
    expected_slots += m;  // one prediction per kept token (see below)
    for (int j = 0; j < m; ++j) {
      // Kept slots carry the clean token of their content position.
      CHECK(std::memcmp(q.tokens.data() + j * td,
                        rec.tokens.data() + q.content_idx[j] * td,
                        sizeof(float) * td) == 0);
      if (j > 0) CHECK(q.content_idx[j] > q.content_idx[j - 1]);
      // Chained targets: each slot points at the next kept index.
      CHECK(q.target_idx[j] == q.content_idx[j]);
    }
    CHECK(q.target_idx[m] == q.n);  // last kept slot points at the sentinel
  }
  CHECK(plan.slots() == expected_slots);
}

TEST_CASE("in-place masked plans zero hidden tokens and mark only them") {
  ModelConfig mc = train_model_cfg(false);
  NoiseSchedule sched = NoiseSchedule::cosine(100);
  auto data = tiny_dataset();
  TrainConfig cfg = small_train("mar");
  cfg.cond_dropout = 0.0;
  BatchPlan plan = plan_step(mc, cfg, sched, data, 2);
  CHECK(plan.attention == AttentionMode::bidirectional);
  int td = mc.token_dim;
  int n = 8;
  int slots_per_seq = mc.cond_len + 1 + n;
  int s = 0;
  for (int b = 0; b < cfg.batch; ++b) {
    const SeqInput& q = plan.seqs[b];
    const CvtkRecord& rec = data[plan.records[b]];
    REQUIRE(static_cast<int>(q.content_idx.size()) == n);
    CHECK(q.target_idx[0] == n);  // start slot holds the sentinel, no loss
    for (int pos = 0; pos < n; ++pos) {
      bool zeroed = true;
      for (int c = 0; c < td; ++c)
        zeroed &= q.tokens[pos * td + c] == 0.0f;
      bool clean = std::memcmp(q.tokens.data() + pos * td,
                               rec.tokens.data() + pos * td,
                               sizeof(float) * td) == 0;
      CHECK((zeroed || clean));
      CHECK(q.target_idx[pos + 1] == pos);
    }
    // Loss rows of this sequence target exactly the zeroed positions.
    while (s < plan.slots() &&
           plan.slot_rows[s] < (b + 1) * slots_per_seq) {
      int off = plan.slot_rows[s] - b * slots_per_seq - mc.cond_len;
      int pos = off - 1;
      bool zeroed = true;
      for (int c = 0; c < td; ++c)
        zeroed &= q.tokens[pos * td + c] == 0.0f;
      CHECK(zeroed);
      CHECK(std::memcmp(plan.targets.data() + s * td,
                        rec.tokens.data() + pos * td,
                        sizeof(float) * td) == 0);
      ++s;
    }
  }
  CHECK(s == plan.slots());
}

TEST_CASE("condition dropout follows its configured rate") {
  ModelConfig mc = train_model_cfg();
  NoiseSchedule sched = NoiseSchedule::cosine(100);
  auto data = tiny_dataset();
  TrainConfig cfg = small_train();
  cfg.cond_dropout = 1.0;
  BatchPlan all_fake = plan_step(mc, cfg, sched, data, 0);
  for (const auto& q : all_fake.seqs) CHECK(q.fake_cond);
  cfg.cond_dropout = 0.0;
  BatchPlan none_fake = plan_step(mc, cfg, sched, data, 0);
  for (const auto& q : none_fake.seqs) CHECK_FALSE(q.fake_cond);
  cfg.cond_dropout = 0.1;
  int fake = 0, total = 0;
  for (int step = 0; step < 50; ++step) {
    BatchPlan p = plan_step(mc, cfg, sched, data, step);
    for (const auto& q : p.seqs) {
      fake += q.fake_cond ? 1 : 0;
      ++total;
    }
  }
  double rate = static_cast<double>(fake) / total;  // 300 draws at p = 0.1
  CHECK(rate > 0.03);
  CHECK(rate < 0.2);
}

TEST_CASE("a zero output head makes the pooled loss track token_dim") {
  ModelConfig mc = train_model_cfg();
  auto st = make_model<float>(mc, train_head_cfg(mc), 3);
  NoiseSchedule sched = NoiseSchedule::cosine(100);
  auto data = tiny_dataset();
  TrainConfig cfg = small_train();
  double total = 0;
  int steps = 10;
  for (int s = 0; s < steps; ++s) {
    BatchPlan plan = plan_step(mc, cfg, sched, data, s);
    REQUIRE(plan.slots() > 0);
    total += batch_loss(st, sched, plan).item();
  }
  // Predicted noise is zero, so each slot's loss is |eps|^2 with mean
  // token_dim = 4.
  CHECK(total / steps == doctest::Approx(4.0).epsilon(0.25));
}

TEST_CASE("AdamW reproduces a hand-computed decoupled update") {
  Tensor<float> p = Tensor<float>::from({2}, {1.0f, -2.0f}, true);
  p.grad_mut() = {0.5f, -0.25f};
  AdamW opt(0.1, 0.9, 0.95, 1e-8, 0.02);
  opt.step({{"p", p}});
  // First step: mhat = g, vhat = g^2, so the Adam term is sign(g) modulo
  // eps, and decay subtracts lr * wd * w.
  double u0 = 0.1 * (0.5 / (0.5 + 1e-8) + 0.02 * 1.0);
  double u1 = 0.1 * (-0.25 / (0.25 + 1e-8) + 0.02 * -2.0);
  CHECK(p.vals()[0] == doctest::Approx(1.0 - u0).epsilon(1e-6));
  CHECK(p.vals()[1] == doctest::Approx(-2.0 - u1).epsilon(1e-6));
  CHECK(opt.t() == 1);
}

TEST_CASE("training reduces the loss on a small task") {
  ModelConfig mc = train_model_cfg();
  auto st = make_model<float>(mc, train_head_cfg(mc), 1234);
  TrainConfig cfg = small_train();
  cfg.steps = 150;
  cfg.batch = 8;
  cfg.lr = 3e-3;
  auto data = tiny_dataset(48);
  Trainer tr(std::move(st), cfg);
  std::ostringstream csv;
  std::vector<double> losses;
  tr.run(data, 0, &csv,
         [&](int64_t, double loss) { losses.push_back(loss); });
  REQUIRE(static_cast<int64_t>(losses.size()) == cfg.steps);
  double head = 0, tail = 0;
  for (int i = 0; i < 20; ++i) {
    head += losses[i] / 20;
    tail += losses[losses.size() - 1 - i] / 20;
  }
  CHECK(tail < 0.8 * head);

  // CSV: header plus one line per step.
  std::string text = csv.str();
  CHECK(text.rfind("step,loss\n", 0) == 0);
  CHECK(std::count(text.begin(), text.end(), '\n') ==
        static_cast<int64_t>(cfg.steps) + 1);
}

TEST_CASE("two runs from the same seed agree bit for bit") {
  ModelConfig mc = train_model_cfg();
  TrainConfig cfg = small_train();
  cfg.steps = 12;
  auto data = tiny_dataset();
  auto run = [&]() {
    Trainer tr(make_model<float>(mc, train_head_cfg(mc), 7), cfg);
    tr.run(data, 0, nullptr);
    return tr.model();
  };
  ModelState<float> a = run();
  ModelState<float> b = run();
  auto pa = a.named_params(), pb = b.named_params();
  REQUIRE(pa.size() == pb.size());
  for (size_t i = 0; i < pa.size(); ++i)
    CHECK(std::memcmp(pa[i].second.vals().data(), pb[i].second.vals().data(),
                      sizeof(float) * pa[i].second.size()) == 0);
}

TEST_CASE("a diverging run aborts with the failing step in the message") {
  ModelConfig mc = train_model_cfg();
  auto st = make_model<float>(mc, train_head_cfg(mc), 9);
  TrainConfig cfg = small_train();
  cfg.lr = 1e18;  // guarantees overflow within a few updates
  cfg.steps = 50;
  auto data = tiny_dataset();
  Trainer tr(std::move(st), cfg);
  bool aborted = false;
  try {
    tr.run(data, 0, nullptr);
  } catch (const NumericError& e) {
    aborted = true;
    CHECK(std::string(e.what()).find("step") != std::string::npos);
  }
  CHECK(aborted);
}

TEST_CASE("dataset validation points at the offending record") {
  ModelConfig mc = train_model_cfg();
  auto data = tiny_dataset();
  CHECK_NOTHROW(check_dataset(mc, data));
  auto bad = data;
  bad[3].token_dim = 5;
  CHECK_THROWS_AS(check_dataset(mc, bad), DimensionError);
  bad = data;
  bad[0].token_count = 9;  // longer than max_seq
  CHECK_THROWS_AS(check_dataset(mc, bad), RangeError);
  CHECK_THROWS_AS(check_dataset(mc, {}), ArgumentError);
}
