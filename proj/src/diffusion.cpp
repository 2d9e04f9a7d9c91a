#include "mntp/diffusion.hpp"

#include <cblas.h>

#include "mntp/kernels.hpp"

#include <cmath>

namespace mntp {

NoiseSchedule NoiseSchedule::cosine(int T, double s, double max_beta) {
  if (T < 1) throw ArgumentError("noise schedule: T must be >= 1");
  if (max_beta <= 0.0 || max_beta > 1.0)
    throw ArgumentError("noise schedule: max_beta outside (0, 1]");
  NoiseSchedule sched;
  sched.T = T;
  sched.s = s;
  sched.max_beta = max_beta;
  auto f = [&](double t) {
    double v = std::cos((t / T + s) / (1.0 + s) * M_PI / 2.0);
    return v * v;
  };
  sched.beta.resize(T);
  sched.alpha.resize(T);
  sched.alpha_bar.resize(T);
  double running = 1.0;
  for (int t = 1; t <= T; ++t) {
    double b = std::min(max_beta, 1.0 - f(t) / f(t - 1));
    sched.beta[t - 1] = b;
    sched.alpha[t - 1] = 1.0 - b;
    running *= sched.alpha[t - 1];
    sched.alpha_bar[t - 1] = running;
  }
  return sched;
}

SubSchedule make_subschedule(const NoiseSchedule& sched, int steps,
                             bool lower_variance) {
  if (steps < 1 || steps > sched.T)
    throw ArgumentError("sub-schedule: steps must lie in [1, T] (got " +
                        std::to_string(steps) + " for T = " +
                        std::to_string(sched.T) + ")");
  SubSchedule sub;
  sub.t.resize(steps);
  for (int m = 1; m <= steps; ++m)
    sub.t[m - 1] = static_cast<int>(
        std::llround(static_cast<double>(m) * sched.T / steps));
  for (int k = 0; k < steps; ++k) {
    if (sub.t[k] < 1 || sub.t[k] > sched.T ||
        (k > 0 && sub.t[k] <= sub.t[k - 1]))
      throw NumericError("sub-schedule: stride produced a non-increasing "
                         "step sequence");
  }
  if (sub.t.back() != sched.T)
    throw NumericError("sub-schedule: final step must be T");
  sub.alpha.resize(steps);
  sub.alpha_bar.resize(steps);
  sub.sigma.resize(steps);
  for (int k = 0; k < steps; ++k) {
    double prev = (k == 0) ? 1.0 : sched.abar(sub.t[k - 1]);
    double cur = sched.abar(sub.t[k]);
    sub.alpha_bar[k] = cur;
    sub.alpha[k] = cur / prev;
    if (lower_variance)
      sub.sigma[k] = std::sqrt((1.0 - prev) / (1.0 - cur) * (1.0 - sub.alpha[k]));
    else
      sub.sigma[k] = std::sqrt(1.0 - sub.alpha[k]);
  }
  return sub;
}

void time_embedding(int t, int dim, float* out) {
  if (dim <= 0 || dim % 2 != 0)
    throw ArgumentError("time embedding: dim must be positive and even");
  int half = dim / 2;
  for (int i = 0; i < half; ++i) {
    double freq = std::exp(-std::log(10000.0) * i / half);
    out[2 * i] = static_cast<float>(std::sin(t * freq));
    out[2 * i + 1] = static_cast<float>(std::cos(t * freq));
  }
}

using detail::layernorm_rows;
using detail::linear;

void head_infer_batch(const DiffusionHead<float>& head, int m, const float* x,
                      const float* z, int t, float* out,
                      HeadScratch& scratch) {
  const HeadConfig& cfg = head.cfg;
  int in_dim = cfg.token_dim + cfg.z_dim + cfg.time_dim;
  scratch.in.resize(static_cast<size_t>(m) * in_dim);
  scratch.h.resize(static_cast<size_t>(m) * cfg.width);
  scratch.u.resize(static_cast<size_t>(m) * cfg.width);
  scratch.v.resize(static_cast<size_t>(m) * cfg.width);
  scratch.norm.resize(static_cast<size_t>(m) * cfg.width);

  std::vector<float> temb(cfg.time_dim);
  time_embedding(t, cfg.time_dim, temb.data());
  for (int r = 0; r < m; ++r) {
    float* row = scratch.in.data() + static_cast<int64_t>(r) * in_dim;
    const float* xr = x + static_cast<int64_t>(r) * cfg.token_dim;
    std::copy(xr, xr + cfg.token_dim, row);
    if (cfg.z_dim > 0) {
      const float* zr = z + static_cast<int64_t>(r) * cfg.z_dim;
      std::copy(zr, zr + cfg.z_dim, row + cfg.token_dim);
    }
    std::copy(temb.begin(), temb.end(), row + cfg.token_dim + cfg.z_dim);
  }

  const auto& p = head.params;
  linear(m, in_dim, cfg.width, scratch.in.data(), p.get("in.w").vals().data(),
         p.get("in.b").vals().data(), scratch.h.data());
  for (int b = 0; b < cfg.blocks; ++b) {
    std::string pre = "blk" + std::to_string(b) + ".";
    layernorm_rows(m, cfg.width, scratch.h.data(), scratch.norm.data());
    linear(m, cfg.width, cfg.width, scratch.norm.data(),
           p.get(pre + "w1").vals().data(), p.get(pre + "b1").vals().data(),
           scratch.u.data());
    for (auto& v : scratch.u) v = v / (1.0f + std::exp(-v));
    linear(m, cfg.width, cfg.width, scratch.u.data(),
           p.get(pre + "w2").vals().data(), p.get(pre + "b2").vals().data(),
           scratch.v.data());
    for (size_t i = 0; i < scratch.h.size(); ++i) scratch.h[i] += scratch.v[i];
  }
  layernorm_rows(m, cfg.width, scratch.h.data(), scratch.norm.data());
  linear(m, cfg.width, cfg.token_dim, scratch.norm.data(),
         p.get("out.w").vals().data(), p.get("out.b").vals().data(), out);
  const float* sk = p.get("skip").vals().data();
  for (int r = 0; r < m; ++r) {
    const float* xr = x + static_cast<int64_t>(r) * cfg.token_dim;
    float* orow = out + static_cast<int64_t>(r) * cfg.token_dim;
    for (int c = 0; c < cfg.token_dim; ++c) orow[c] += sk[c] * xr[c];
  }
}

void sample_tokens(const DiffusionHead<float>& head, const SubSchedule& sub,
                   int m, const std::vector<float>& z_c,
                   const std::vector<float>* z_u,
                   const std::vector<double>& omega, double tau,
                   std::vector<Rng>& rngs, std::vector<float>& out) {
  const HeadConfig& cfg = head.cfg;
  int td = cfg.token_dim;
  if (m <= 0) throw ArgumentError("sample_tokens: no slots");
  if (static_cast<int>(rngs.size()) != m ||
      static_cast<int>(omega.size()) != m)
    throw DimensionError("sample_tokens: need one rng and one omega per slot");
  if (cfg.z_dim > 0 && static_cast<int>(z_c.size()) != m * cfg.z_dim)
    throw DimensionError("sample_tokens: z_c must be slots*z_dim");
  if (z_u && cfg.z_dim > 0 && static_cast<int>(z_u->size()) != m * cfg.z_dim)
    throw DimensionError("sample_tokens: z_u must be slots*z_dim");

  out.resize(static_cast<size_t>(m) * td);
  for (int i = 0; i < m; ++i)
    for (int c = 0; c < td; ++c)
      out[static_cast<size_t>(i) * td + c] =
          static_cast<float>(rngs[i].gaussian());

  HeadScratch scratch;
  std::vector<float> eps_c(out.size()), eps_u, eps(out.size());
  if (z_u) eps_u.resize(out.size());
  int K = static_cast<int>(sub.t.size());
  for (int k = K - 1; k >= 0; --k) {
    int t = sub.t[k];
    head_infer_batch(head, m, out.data(), z_c.data(), t, eps_c.data(),
                     scratch);
    if (z_u) {
      head_infer_batch(head, m, out.data(), z_u->data(), t, eps_u.data(),
                       scratch);
      for (int i = 0; i < m; ++i) {
        float w = static_cast<float>(omega[i]);
        for (int c = 0; c < td; ++c) {
          size_t at = static_cast<size_t>(i) * td + c;
          eps[at] = eps_c[at] + w * (eps_c[at] - eps_u[at]);
        }
      }
    } else {
      eps = eps_c;
    }
    float coef1 = static_cast<float>(1.0 / std::sqrt(sub.alpha[k]));
    float coef2 = static_cast<float>((1.0 - sub.alpha[k]) /
                                     std::sqrt(1.0 - sub.alpha_bar[k]));
    // The last reverse step (k == 0) is deterministic.
    float sigma = (k == 0) ? 0.0f : static_cast<float>(sub.sigma[k]);
    float noise_scale = sigma * static_cast<float>(tau);
    for (int i = 0; i < m; ++i) {
      for (int c = 0; c < td; ++c) {
        size_t at = static_cast<size_t>(i) * td + c;
        out[at] = coef1 * (out[at] - coef2 * eps[at]);
      }
      if (noise_scale != 0.0f)
        for (int c = 0; c < td; ++c)
          out[static_cast<size_t>(i) * td + c] +=
              noise_scale * static_cast<float>(rngs[i].gaussian());
    }
  }
}

std::vector<float> sample_token(const DiffusionHead<float>& head,
                                const SubSchedule& sub,
                                const std::vector<float>& z_c,
                                const std::vector<float>* z_u, double omega,
                                double tau, Rng& rng) {
  std::vector<Rng> rngs{rng};
  std::vector<float> out;
  sample_tokens(head, sub, 1, z_c, z_u, {omega}, tau, rngs, out);
  rng = rngs[0];  // hand the advanced counter back to the caller
  return out;
}

}  // namespace mntp
