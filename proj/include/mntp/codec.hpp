#pragma once

// Tokenization codec between 2-D latent maps and flat sequences of
// continuous-valued tokens, plus the synthetic processes used to make
// verifiable datasets. Patchify is pure reindexing: round-trips are bit-exact.

#include <cstdint>
#include <vector>

#include "mntp/cvtk.hpp"
#include "mntp/rng.hpp"

namespace mntp {

// Dense latent map, row-major [frame][band][channel].
struct LatentMap {
  int frames = 0;
  int bands = 0;
  int channels = 0;
  std::vector<float> data;

  static LatentMap zeros(int frames, int bands, int channels);
  float& at(int f, int b, int c) {
    return data[(static_cast<int64_t>(f) * bands + b) * channels + c];
  }
  float at(int f, int b, int c) const {
    return data[(static_cast<int64_t>(f) * bands + b) * channels + c];
  }
};

struct TokenGeometry {
  int patch = 0;
  int rows = 0;       // frame axis, in patches
  int cols = 0;       // band axis, in patches
  int channels = 0;
  int frames_orig = 0;  // before padding; unpatchify trims back to this
  int count() const { return rows * cols; }
  int dim() const { return channels * patch * patch; }
};

// Flat token sequence [token][dim]. Token i covers patch (i / cols, i % cols);
// within a token, values are laid out in (patch row, patch col, channel) order.
struct TokenSequence {
  TokenGeometry geom;
  std::vector<float> tokens;
};

// Right-pads the frame axis with zero frames up to the next multiple of
// `quantum`. The reference pipeline pads its 250-frame latents to 256 with
// quantum 16 (temporal compression 4 times patch 4), giving 256 tokens.
LatentMap pad_frames(const LatentMap& map, int quantum);

// Requires both spatial extents to divide by `patch`.
TokenSequence patchify(const LatentMap& map, int patch);

// Inverse of patchify; trims the frame axis back to geom.frames_orig.
LatentMap unpatchify(const TokenSequence& seq);

// pad_frames (with quantum = compression * patch) followed by patchify.
TokenSequence encode_latent(const LatentMap& map, int patch, int compression);

// ---------------------------------------------------------------------------
// Synthetic processes

// First-order Gaussian vector autoregression with class-dependent offsets:
//   x^1 = b_k + sigma * eps,   x^i = A x^{i-1} + b_k + sigma * eps.
// A = rho * Q with Q orthogonal, so the homogeneous part contracts every
// vector's norm by exactly rho per step. Each class also carries a fixed
// random condition embedding (the "text" side of a record).
struct GaussianArProcess {
  int dim = 0;
  int classes = 0;
  double rho = 0.0;
  double sigma = 0.0;
  int cond_len = 0;
  int cond_dim = 0;
  uint64_t seed = 0;
  std::vector<double> A;           // dim x dim, row-major
  std::vector<double> class_bias;  // classes x dim
  std::vector<double> class_cond;  // classes x (cond_len * cond_dim)
};

GaussianArProcess make_gaussian_ar_process(int dim, int classes, double rho,
                                           double sigma, int cond_len,
                                           int cond_dim, uint64_t seed);

// One transition x' = A x + b_k + sigma * eps, eps provided by the caller.
std::vector<double> gaussian_ar_step(const GaussianArProcess& proc,
                                     const std::vector<double>& x, int k,
                                     const std::vector<double>& eps);

// Samples a length-`len` sequence for class k; draws come from `rng`.
std::vector<float> sample_gaussian_ar(const GaussianArProcess& proc, int k,
                                      int len, Rng& rng);

// A batch of records, classes assigned round-robin, each drawn from its own
// stream keyed by (seed, record index). The class condition rides along.
std::vector<CvtkRecord> sample_gaussian_ar_dataset(
    const GaussianArProcess& proc, int count, int len, uint64_t seed);

// Sinusoidal latent maps tokenized through the codec: class k shifts the
// phase and frame frequency, `noise` jitters the map before patchify.
// Classes cycle round-robin; conditions are class lookups drawn once from
// (seed, "sinusoid-cond"). frames and bands must divide by patch.
std::vector<CvtkRecord> sample_sinusoid_map_dataset(
    int frames, int bands, int channels, int patch, int classes, double noise,
    int cond_len, int cond_dim, int count, uint64_t seed);

// Stationary mean (I - A)^{-1} b_k, by direct linear solve.
std::vector<double> gaussian_ar_stationary_mean(const GaussianArProcess& proc,
                                                int k);

// Stationary covariance, the fixed point of S = A S A^T + sigma^2 I,
// computed by iterating the recurrence to convergence.
std::vector<double> gaussian_ar_stationary_cov(const GaussianArProcess& proc);

// Deterministic sinusoidal latent maps, for exercising the codec path end to
// end. Record r of class k is patchify(map) with phases set by (k, r).
LatentMap sinusoid_map(int frames, int bands, int channels, int k, int r);

}  // namespace mntp
