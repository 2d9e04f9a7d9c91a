#pragma once

// Token-wise diffusion: cosine noise schedule, the per-token noise-prediction
// MLP head, its training loss, and the reverse-process sampler. The head is
// templated on scalar so the identical code path runs in double precision
// under finite-difference checks.

#include <cmath>
#include <optional>
#include <vector>

#include "mntp/errors.hpp"
#include "mntp/params.hpp"
#include "mntp/rng.hpp"
#include "mntp/tensor.hpp"

namespace mntp {

struct NoiseSchedule {
  int T = 0;
  double s = 0.008;
  double max_beta = 0.999;
  std::vector<double> beta;       // index t-1 holds step t, t in 1..T
  std::vector<double> alpha;      // 1 - beta
  std::vector<double> alpha_bar;  // running product of alpha

  // Squared-cosine profile; betas are clipped at max_beta and alpha_bar is
  // rebuilt from the clipped alphas, keeping it positive and decreasing.
  static NoiseSchedule cosine(int T = 1000, double s = 0.008,
                              double max_beta = 0.999);

  double abar(int t) const {  // convention: abar(0) = 1
    if (t < 0 || t > T)
      throw RangeError("noise schedule: t = " + std::to_string(t) +
                       " outside [0, " + std::to_string(T) + "]");
    return t == 0 ? 1.0 : alpha_bar[t - 1];
  }
};

// Evenly strided subset of 1..T for inference, with resampled per-step
// alphas and posterior noise scales. The final original step T is always
// included; its lower-variance sigma is zero by construction.
struct SubSchedule {
  std::vector<int> t;             // ascending, last element == T
  std::vector<double> alpha;      // alpha'_k = abar(t_k) / abar(t_{k-1})
  std::vector<double> alpha_bar;  // abar(t_k)
  std::vector<double> sigma;
};

SubSchedule make_subschedule(const NoiseSchedule& sched, int steps,
                             bool lower_variance = true);

// x_t = sqrt(abar_t) x + sqrt(1 - abar_t) eps, elementwise. t in 1..T.
template <class S>
std::vector<S> forward_diffuse(const NoiseSchedule& sched,
                               const std::vector<S>& x, int t,
                               const std::vector<S>& eps) {
  if (t < 1 || t > sched.T)
    throw RangeError("forward_diffuse: t = " + std::to_string(t) +
                     " outside [1, " + std::to_string(sched.T) + "]");
  if (x.size() != eps.size())
    throw DimensionError("forward_diffuse: x and eps sizes differ");
  S a = static_cast<S>(std::sqrt(sched.abar(t)));
  S b = static_cast<S>(std::sqrt(1.0 - sched.abar(t)));
  std::vector<S> out(x.size());
  for (size_t i = 0; i < x.size(); ++i) out[i] = a * x[i] + b * eps[i];
  return out;
}

// Sinusoidal embedding of the integer step t; dim must be even.
void time_embedding(int t, int dim, float* out);
template <class S>
std::vector<S> time_embedding_vec(int t, int dim) {
  std::vector<float> f(dim);
  time_embedding(t, dim, f.data());
  return std::vector<S>(f.begin(), f.end());
}

// ---------------------------------------------------------------------------
// Noise-prediction head

struct HeadConfig {
  int token_dim = 0;
  int z_dim = 0;  // conditioning width; 0 means unconditional
  int width = 128;
  int blocks = 3;
  int time_dim = 64;
};

template <class S>
struct DiffusionHead {
  HeadConfig cfg;
  ParamStore<S> params;

  template <class T>
  DiffusionHead<T> cast() const {
    return DiffusionHead<T>{cfg, params.template cast<T>()};
  }
};

// Input projection and residual blocks start small; the output layer and the
// skip gate start at exactly zero, so an untrained head predicts zero noise.
// The prediction is out(LN(h)) + skip * x_t: the layernorm bounds the MLP
// term, and the learned linear-in-x_t term keeps far-field predictions
// proportional to x_t, so reverse-sampling trajectories that overshoot the
// training range stay inside a contracting regime.
template <class S>
DiffusionHead<S> make_head(const HeadConfig& cfg, Rng& rng) {
  if (cfg.token_dim <= 0 || cfg.width <= 0 || cfg.blocks < 0 ||
      cfg.z_dim < 0 || cfg.time_dim <= 0 || cfg.time_dim % 2 != 0)
    throw ArgumentError("head: token_dim/width/time_dim must be positive and "
                        "time_dim even");
  DiffusionHead<S> head;
  head.cfg = cfg;
  int in_dim = cfg.token_dim + cfg.z_dim + cfg.time_dim;
  auto& p = head.params;
  p.add("in.w", init_normal<S>({in_dim, cfg.width}, 0.02, rng));
  p.add("in.b", init_zeros<S>({cfg.width}));
  for (int b = 0; b < cfg.blocks; ++b) {
    std::string pre = "blk" + std::to_string(b) + ".";
    p.add(pre + "w1", init_normal<S>({cfg.width, cfg.width}, 0.02, rng));
    p.add(pre + "b1", init_zeros<S>({cfg.width}));
    p.add(pre + "w2", init_normal<S>({cfg.width, cfg.width}, 0.02, rng));
    p.add(pre + "b2", init_zeros<S>({cfg.width}));
  }
  p.add("out.w", init_zeros<S>({cfg.width, cfg.token_dim}));
  p.add("out.b", init_zeros<S>({cfg.token_dim}));
  p.add("skip", init_zeros<S>({cfg.token_dim}));
  return head;
}

// Batched graph forward: rows are independent slots.
template <class S>
Tensor<S> head_forward(const DiffusionHead<S>& head, const Tensor<S>& x_t,
                       const Tensor<S>& z, const Tensor<S>& temb) {
  const HeadConfig& cfg = head.cfg;
  if (x_t.shape().size() != 2 || x_t.shape()[1] != cfg.token_dim)
    throw DimensionError("head_forward: x_t must be (slots, token_dim)");
  if (temb.shape()[1] != cfg.time_dim || temb.shape()[0] != x_t.shape()[0])
    throw DimensionError("head_forward: temb must be (slots, time_dim)");
  std::vector<Tensor<S>> cols{x_t};
  if (cfg.z_dim > 0) {
    if (z.shape().size() != 2 || z.shape()[1] != cfg.z_dim ||
        z.shape()[0] != x_t.shape()[0])
      throw DimensionError("head_forward: z must be (slots, z_dim)");
    cols.push_back(z);
  }
  cols.push_back(temb);
  const auto& p = head.params;
  Tensor<S> h = add(matmul(concat_cols(cols), p.get("in.w")), p.get("in.b"));
  for (int b = 0; b < cfg.blocks; ++b) {
    std::string pre = "blk" + std::to_string(b) + ".";
    Tensor<S> u = layernorm_lastdim(h);
    u = silu(add(matmul(u, p.get(pre + "w1")), p.get(pre + "b1")));
    u = add(matmul(u, p.get(pre + "w2")), p.get(pre + "b2"));
    h = add(h, u);
  }
  Tensor<S> y =
      add(matmul(layernorm_lastdim(h), p.get("out.w")), p.get("out.b"));
  return add(y, mul(x_t, p.get("skip")));
}

// Per-slot noise-prediction losses, sum of squared error over the token
// dimension. Targets, steps and noise are data (no gradient flows into them);
// z stays graph-connected.
template <class S>
Tensor<S> head_loss_slots(const DiffusionHead<S>& head,
                          const NoiseSchedule& sched, const Tensor<S>& z,
                          const std::vector<S>& targets,
                          const std::vector<int>& ts,
                          const std::vector<S>& eps) {
  int m = static_cast<int>(ts.size());
  int td = head.cfg.token_dim;
  if (static_cast<int>(targets.size()) != m * td ||
      static_cast<int>(eps.size()) != m * td)
    throw DimensionError("head_loss_slots: targets/eps must be slots*token_dim");
  std::vector<S> xt(targets.size());
  std::vector<S> te(static_cast<size_t>(m) * head.cfg.time_dim);
  for (int i = 0; i < m; ++i) {
    int t = ts[i];
    if (t < 1 || t > sched.T)
      throw RangeError("head_loss_slots: t outside [1, T]");
    S a = static_cast<S>(std::sqrt(sched.abar(t)));
    S b = static_cast<S>(std::sqrt(1.0 - sched.abar(t)));
    for (int c = 0; c < td; ++c)
      xt[i * td + c] = a * targets[i * td + c] + b * eps[i * td + c];
    auto emb = time_embedding_vec<S>(t, head.cfg.time_dim);
    std::copy(emb.begin(), emb.end(), te.begin() + static_cast<size_t>(i) *
                                          head.cfg.time_dim);
  }
  Tensor<S> xt_t = Tensor<S>::from({m, td}, std::move(xt));
  Tensor<S> te_t = Tensor<S>::from({m, head.cfg.time_dim}, std::move(te));
  Tensor<S> eps_t = Tensor<S>::from({m, td}, std::vector<S>(eps));
  Tensor<S> pred = head_forward(head, xt_t, z, te_t);
  Tensor<S> d = sub(eps_t, pred);
  return rowsum_lastdim(mul(d, d));
}

// Single-slot convenience: draws t uniform on {1..T} then the noise vector
// from `rng`, and returns the scalar loss.
template <class S>
Tensor<S> head_loss(const DiffusionHead<S>& head, const NoiseSchedule& sched,
                    const Tensor<S>& z, const std::vector<S>& x, Rng& rng) {
  int t = 1 + static_cast<int>(rng.below(static_cast<uint64_t>(sched.T)));
  std::vector<S> eps(x.size());
  for (auto& e : eps) e = static_cast<S>(rng.gaussian());
  return head_loss_slots(head, sched, z, x, {t}, eps);
}

// ---------------------------------------------------------------------------
// Raw float inference path (no graph, scratch reuse, BLAS throughout).

struct HeadScratch {
  std::vector<float> in, h, u, v, norm;
};

// Predicted noise for m slots sharing one diffusion step t.
// x: m*token_dim, z: m*z_dim (ignored when z_dim == 0), out: m*token_dim.
void head_infer_batch(const DiffusionHead<float>& head, int m, const float* x,
                      const float* z, int t, float* out, HeadScratch& scratch);

// Reverse-process sampling for m independent slots under one sub-schedule.
// Guidance blends a conditional and an unconditional lane per slot:
//   eps = eps_c + omega_i (eps_c - eps_u),
// computed on one shared trajectory (identical x_t and noise draws), so
// z_u == z_c reproduces the unguided path bit for bit. tau scales the
// injected posterior noise; the final step is deterministic.
void sample_tokens(const DiffusionHead<float>& head, const SubSchedule& sub,
                   int m, const std::vector<float>& z_c,
                   const std::vector<float>* z_u,
                   const std::vector<double>& omega, double tau,
                   std::vector<Rng>& rngs, std::vector<float>& out);

// One-slot wrapper.
std::vector<float> sample_token(const DiffusionHead<float>& head,
                                const SubSchedule& sub,
                                const std::vector<float>& z_c,
                                const std::vector<float>* z_u, double omega,
                                double tau, Rng& rng);

}  // namespace mntp
