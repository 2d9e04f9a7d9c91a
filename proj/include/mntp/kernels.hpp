#pragma once

// Raw float kernels shared by the inference paths (diffusion head, KV-cached
// decoder). These mirror the graph ops in tensor.hpp closely enough that a
// float forward pass through either route lands within float tolerance.

#include <cblas.h>

#include <cmath>
#include <cstdint>

namespace mntp::detail {

// y (m, out) = x (m, in) * w (in, out) + b, via BLAS.
inline void linear(int m, int in, int out, const float* x, const float* w,
                   const float* b, float* y) {
  for (int r = 0; r < m; ++r)
    for (int c = 0; c < out; ++c) y[r * out + c] = b[c];
  cblas_sgemm(CblasRowMajor, CblasNoTrans, CblasNoTrans, m, out, in, 1.0f, x,
              in, w, out, 1.0f, y, out);
}

inline void layernorm_rows(int m, int d, const float* x, float* y) {
  for (int r = 0; r < m; ++r) {
    const float* in = x + static_cast<int64_t>(r) * d;
    float* out = y + static_cast<int64_t>(r) * d;
    float mean = 0;
    for (int i = 0; i < d; ++i) mean += in[i];
    mean /= static_cast<float>(d);
    float var = 0;
    for (int i = 0; i < d; ++i) var += (in[i] - mean) * (in[i] - mean);
    var /= static_cast<float>(d);
    float is = 1.0f / std::sqrt(var + 1e-5f);
    for (int i = 0; i < d; ++i) out[i] = (in[i] - mean) * is;
  }
}

// Layernorm followed by the learned elementwise scale and shift.
inline void affine_ln_rows(int m, int d, const float* x, const float* g,
                           const float* b, float* y) {
  layernorm_rows(m, d, x, y);
  for (int r = 0; r < m; ++r) {
    float* out = y + static_cast<int64_t>(r) * d;
    for (int i = 0; i < d; ++i) out[i] = out[i] * g[i] + b[i];
  }
}

inline void silu_inplace(float* x, int64_t count) {
  for (int64_t i = 0; i < count; ++i) x[i] = x[i] / (1.0f + std::exp(-x[i]));
}

inline void gelu_inplace(float* x, int64_t count) {
  const float inv_sqrt2 = 0.70710678118654752f;
  for (int64_t i = 0; i < count; ++i)
    x[i] = 0.5f * x[i] * (1.0f + std::erf(x[i] * inv_sqrt2));
}

}  // namespace mntp::detail
