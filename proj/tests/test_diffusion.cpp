#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "mntp/diffusion.hpp"
#include "mntp/gradcheck.hpp"
#include "mntp/rng.hpp"

using namespace mntp;

TEST_CASE("cosine schedule satisfies its contract at T = 1000") {
  auto sched = NoiseSchedule::cosine();
  REQUIRE(sched.T == 1000);
  CHECK(sched.abar(0) == 1.0);
  CHECK(sched.abar(1) > 0.999);
  CHECK(sched.abar(1000) < 0.01);
  for (int t = 1; t <= 1000; ++t) {
    CHECK(sched.abar(t) > 0.0);
    CHECK(sched.abar(t) <= 1.0);
    CHECK(sched.abar(t) < sched.abar(t - 1));
    CHECK(sched.beta[t - 1] <= 0.999);
    CHECK(sched.beta[t - 1] > 0.0);
  }
  // The squared-cosine profile drives the terminal step into the clip.
  CHECK(sched.beta[999] == 0.999);

  // Away from the clip the betas reproduce 1 - f(t)/f(t-1) exactly.
  auto f = [](double t) {
    double v = std::cos((t / 1000.0 + 0.008) / 1.008 * M_PI / 2.0);
    return v * v;
  };
  for (int t : {1, 10, 100, 500, 900}) {
    CHECK(sched.beta[t - 1] ==
          doctest::Approx(1.0 - f(t) / f(t - 1)).epsilon(1e-12));
  }
  CHECK_THROWS_AS(sched.abar(-1), RangeError);
  CHECK_THROWS_AS(sched.abar(1001), RangeError);
}

TEST_CASE("forward diffusion interpolates signal and noise") {
  auto sched = NoiseSchedule::cosine();
  std::vector<double> x = {1.0, -2.0};
  std::vector<double> eps = {0.5, 0.25};
  auto xt = forward_diffuse(sched, x, 700, eps);
  double a = std::sqrt(sched.abar(700));
  double b = std::sqrt(1.0 - sched.abar(700));
  CHECK(xt[0] == doctest::Approx(a * 1.0 + b * 0.5).epsilon(1e-12));
  CHECK(xt[1] == doctest::Approx(a * -2.0 + b * 0.25).epsilon(1e-12));
  CHECK_THROWS_AS(forward_diffuse(sched, x, 0, eps), RangeError);
  CHECK_THROWS_AS(forward_diffuse(sched, x, 1001, eps), RangeError);

  // Monte Carlo: over fresh noise the marginal has mean sqrt(abar) x and
  // variance 1 - abar.
  Rng rng(1, "fd-mc");
  const int n = 40000;
  double mean = 0, var = 0;
  for (int i = 0; i < n; ++i) {
    std::vector<double> e = {rng.gaussian()};
    double v = forward_diffuse<double>(sched, {2.0}, 700, e)[0];
    mean += v;
    var += v * v;
  }
  mean /= n;
  var = var / n - mean * mean;
  CHECK(mean == doctest::Approx(a * 2.0).epsilon(0.02));
  CHECK(var == doctest::Approx(1.0 - sched.abar(700)).epsilon(0.03));
}

TEST_CASE("the strided sub-schedule keeps the endpoints and telescopes") {
  auto sched = NoiseSchedule::cosine();
  auto sub = make_subschedule(sched, 100);
  REQUIRE(sub.t.size() == 100);
  CHECK(sub.t[0] == 10);
  CHECK(sub.t[49] == 500);
  CHECK(sub.t.back() == 1000);
  double prod = 1.0;
  for (double a : sub.alpha) prod *= a;
  CHECK(prod == doctest::Approx(sched.abar(1000)).epsilon(1e-10));
  CHECK(sub.sigma[0] == 0.0);  // lower-variance sigma vanishes at the end
  for (size_t k = 1; k < sub.sigma.size(); ++k) CHECK(sub.sigma[k] > 0.0);

  // steps == T recovers the original schedule and the DDPM posterior noise.
  auto full = make_subschedule(sched, 1000);
  for (int k = 0; k < 1000; ++k) {
    CHECK(full.t[k] == k + 1);
    CHECK(full.alpha[k] == doctest::Approx(sched.alpha[k]).epsilon(1e-12));
    double prev = sched.abar(k);
    double post = (1.0 - prev) / (1.0 - sched.abar(k + 1)) * sched.beta[k];
    CHECK(full.sigma[k] * full.sigma[k] ==
          doctest::Approx(post).epsilon(1e-10));
  }

  auto upper = make_subschedule(sched, 100, false);
  for (int k = 0; k < 100; ++k)
    CHECK(upper.sigma[k] ==
          doctest::Approx(std::sqrt(1.0 - upper.alpha[k])).epsilon(1e-12));

  auto one = make_subschedule(sched, 1);
  CHECK(one.t == std::vector<int>{1000});
  CHECK(one.alpha[0] == doctest::Approx(sched.abar(1000)).epsilon(1e-12));
  CHECK(one.sigma[0] == 0.0);

  CHECK_THROWS_AS(make_subschedule(sched, 1001), ArgumentError);
  CHECK_THROWS_AS(make_subschedule(sched, 0), ArgumentError);
}

TEST_CASE("time embeddings are deterministic and discriminate steps") {
  auto a = time_embedding_vec<float>(17, 8);
  auto b = time_embedding_vec<float>(17, 8);
  CHECK(a == b);
  auto c = time_embedding_vec<float>(18, 8);
  CHECK(a != c);
  auto zero = time_embedding_vec<float>(0, 8);
  for (int i = 0; i < 4; ++i) {
    CHECK(zero[2 * i] == 0.0f);    // sin(0)
    CHECK(zero[2 * i + 1] == 1.0f);  // cos(0)
  }
  std::vector<float> buf(7);
  CHECK_THROWS_AS(time_embedding(1, 7, buf.data()), ArgumentError);
}

TEST_CASE("head construction: shapes, parameter count, zero output layer") {
  HeadConfig cfg;
  cfg.token_dim = 4;
  cfg.z_dim = 6;
  cfg.width = 16;
  cfg.blocks = 2;
  cfg.time_dim = 8;
  Rng rng(2, "head-init");
  auto head = make_head<float>(cfg, rng);
  // in: (4+6+8)*16 + 16; per block: 2*(16*16 + 16); out: 16*4 + 4; skip: 4.
  int64_t expect = 18 * 16 + 16 + 2 * (2 * (16 * 16 + 16)) + 16 * 4 + 4 + 4;
  CHECK(head.params.count() == expect);
  for (float v : head.params.get("out.w").vals()) CHECK(v == 0.0f);

  // Zero output layer: the untrained head predicts exactly zero noise.
  auto x = Tensor<float>::from({3, 4}, std::vector<float>(12, 0.7f));
  auto z = Tensor<float>::from({3, 6}, std::vector<float>(18, -0.3f));
  std::vector<float> te(3 * 8);
  for (int r = 0; r < 3; ++r) time_embedding(5, 8, te.data() + r * 8);
  auto pred = head_forward(head, x, z, Tensor<float>::from({3, 8}, te));
  for (float v : pred.vals()) CHECK(v == 0.0f);

  CHECK_THROWS_AS(make_head<float>(HeadConfig{}, rng), ArgumentError);
}

TEST_CASE("with an untrained head the expected loss equals token_dim") {
  HeadConfig cfg;
  cfg.token_dim = 4;
  cfg.z_dim = 3;
  cfg.width = 8;
  cfg.blocks = 1;
  cfg.time_dim = 4;
  Rng rng(3, "head-init");
  auto head = make_head<double>(cfg, rng);
  auto sched = NoiseSchedule::cosine();
  Rng lrng(3, "head-loss");
  double acc = 0;
  const int reps = 3000;
  auto z = Tensor<double>::from({1, 3}, {0.1, -0.2, 0.3});
  for (int i = 0; i < reps; ++i)
    acc += head_loss(head, sched, z, {0.5, -1.0, 0.25, 2.0}, lrng).item();
  // Prediction is zero, so each slot contributes |eps|^2 ~ chi^2(token_dim).
  CHECK(acc / reps == doctest::Approx(4.0).epsilon(0.05));
}

TEST_CASE("head loss is deterministic given the rng state") {
  HeadConfig cfg;
  cfg.token_dim = 3;
  cfg.z_dim = 2;
  cfg.width = 8;
  cfg.blocks = 1;
  cfg.time_dim = 4;
  Rng init(5, "head-init");
  auto head = make_head<float>(cfg, init);
  auto sched = NoiseSchedule::cosine();
  auto z = Tensor<float>::from({1, 2}, {0.4f, 0.6f});
  Rng r1(7, "loss", 11), r2(7, "loss", 11);
  auto a = head_loss(head, sched, z, {1.0f, 2.0f, 3.0f}, r1);
  auto b = head_loss(head, sched, z, {1.0f, 2.0f, 3.0f}, r2);
  CHECK(a.item() == b.item());
}

TEST_CASE("head gradients agree with finite differences in double") {
  HeadConfig cfg;
  cfg.token_dim = 3;
  cfg.z_dim = 4;
  cfg.width = 8;
  cfg.blocks = 2;
  cfg.time_dim = 4;
  Rng rng(6, "head-init");
  auto head = make_head<double>(cfg, rng);
  // Give the zero-initialized output layer random values so its gradient
  // path is exercised too.
  Rng orng(6, "head-out");
  for (auto& v : head.params.get("out.w").vals_mut())
    v = 0.05 * orng.gaussian();

  const int m = 4;
  Rng drng(6, "head-data");
  std::vector<double> targets(m * 3), eps(m * 3), zvals(m * 4);
  std::vector<int> ts = {1, 250, 600, 1000};
  for (auto& v : targets) v = drng.gaussian();
  for (auto& v : eps) v = drng.gaussian();
  for (auto& v : zvals) v = drng.gaussian();
  auto z = Tensor<double>::from({m, 4}, std::move(zvals), true);
  auto sched = NoiseSchedule::cosine();

  std::vector<Tensor<double>> leaves;
  for (auto& [name, t] : head.params.items) leaves.push_back(t);
  leaves.push_back(z);
  auto res = grad_check_all<double>(
      [&] { return mean(head_loss_slots(head, sched, z, targets, ts, eps)); },
      leaves, 1e-5);
  CHECK(res.max_rel_err < 1e-5);
}

TEST_CASE("raw inference matches the graph forward pass") {
  HeadConfig cfg;
  cfg.token_dim = 5;
  cfg.z_dim = 6;
  cfg.width = 32;
  cfg.blocks = 2;
  cfg.time_dim = 8;
  Rng rng(8, "head-init");
  auto head = make_head<float>(cfg, rng);
  Rng orng(8, "head-out");
  for (auto& v : head.params.get("out.w").vals_mut())
    v = static_cast<float>(0.1 * orng.gaussian());

  const int m = 7, t = 431;
  Rng drng(8, "infer-data");
  std::vector<float> x(m * 5), z(m * 6);
  for (auto& v : x) v = static_cast<float>(drng.gaussian());
  for (auto& v : z) v = static_cast<float>(drng.gaussian());

  std::vector<float> raw(m * 5);
  HeadScratch scratch;
  head_infer_batch(head, m, x.data(), z.data(), t, raw.data(), scratch);

  std::vector<float> te(m * 8);
  for (int r = 0; r < m; ++r) time_embedding(t, 8, te.data() + r * 8);
  NoGradGuard ng;
  auto graph = head_forward(head, Tensor<float>::from({m, 5}, x),
                            Tensor<float>::from({m, 6}, z),
                            Tensor<float>::from({m, 8}, te));
  for (int i = 0; i < m * 5; ++i)
    CHECK(std::abs(raw[i] - graph.vals()[i]) < 1e-5);
}

TEST_CASE("sampling is deterministic and guidance collapses when z_u = z_c") {
  HeadConfig cfg;
  cfg.token_dim = 4;
  cfg.z_dim = 5;
  cfg.width = 16;
  cfg.blocks = 1;
  cfg.time_dim = 8;
  Rng rng(9, "head-init");
  auto head = make_head<float>(cfg, rng);
  Rng orng(9, "head-out");
  for (auto& v : head.params.get("out.w").vals_mut())
    v = static_cast<float>(0.2 * orng.gaussian());
  auto sched = NoiseSchedule::cosine();
  auto sub = make_subschedule(sched, 25);

  const int m = 3;
  std::vector<float> zc(m * 5, 0.3f), zu(m * 5, -0.8f);
  std::vector<double> omega(m, 3.0);

  auto draw = [&](const std::vector<float>* uncond, double tau,
                  uint64_t lane) {
    std::vector<Rng> rngs;
    for (int i = 0; i < m; ++i) rngs.emplace_back(10, "sample", lane, i);
    std::vector<float> out;
    sample_tokens(head, sub, m, zc, uncond, omega, tau, rngs, out);
    return out;
  };

  CHECK(draw(nullptr, 1.0, 0) == draw(nullptr, 1.0, 0));  // reproducible
  CHECK(draw(nullptr, 1.0, 0) != draw(nullptr, 1.0, 1));  // lane keyed
  CHECK(draw(nullptr, 0.0, 2) == draw(nullptr, 0.0, 2));  // tau = 0 path
  CHECK(draw(nullptr, 0.0, 0) != draw(nullptr, 1.0, 0));

  // Same condition on both lanes: the guided trajectory is bit-identical to
  // the unguided one, for any omega.
  std::vector<float> zc_copy = zc;
  CHECK(draw(&zc_copy, 1.0, 0) == draw(nullptr, 1.0, 0));
  CHECK(draw(&zu, 1.0, 0) != draw(nullptr, 1.0, 0));
}

TEST_CASE("a zero head with tau = 0 rescales the initial noise exactly") {
  HeadConfig cfg;
  cfg.token_dim = 6;
  cfg.z_dim = 0;
  cfg.width = 8;
  cfg.blocks = 1;
  cfg.time_dim = 4;
  Rng rng(11, "head-init");
  auto head = make_head<float>(cfg, rng);  // zero output layer: eps_hat = 0
  auto sched = NoiseSchedule::cosine();
  auto sub = make_subschedule(sched, 50);

  std::vector<Rng> rngs{Rng(12, "sample", 0, 0)};
  std::vector<float> out;
  sample_tokens(head, sub, 1, {}, nullptr, {0.0}, 0.0, rngs, out);

  // With eps_hat = 0 every step multiplies by 1/sqrt(alpha'), which
  // telescopes to 1/sqrt(abar(T)).
  Rng replay(12, "sample", 0, 0);
  double scale = 1.0 / std::sqrt(sched.abar(1000));
  for (int c = 0; c < 6; ++c) {
    double x_init = replay.gaussian();
    CHECK(out[c] == doctest::Approx(x_init * scale).epsilon(1e-4));
  }
}
