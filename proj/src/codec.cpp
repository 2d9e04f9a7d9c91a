#include "mntp/codec.hpp"

#include <cmath>
#include <cstring>
#include <string>

#include "mntp/errors.hpp"

namespace mntp {

LatentMap LatentMap::zeros(int frames, int bands, int channels) {
  if (frames <= 0 || bands <= 0 || channels <= 0)
    throw GeometryError("LatentMap: all extents must be positive, got " +
                        std::to_string(frames) + "x" + std::to_string(bands) +
                        "x" + std::to_string(channels));
  LatentMap m;
  m.frames = frames;
  m.bands = bands;
  m.channels = channels;
  m.data.assign(static_cast<int64_t>(frames) * bands * channels, 0.0f);
  return m;
}

LatentMap pad_frames(const LatentMap& map, int quantum) {
  if (quantum <= 0) throw GeometryError("pad_frames: quantum must be positive");
  int padded = ((map.frames + quantum - 1) / quantum) * quantum;
  if (padded == map.frames) return map;
  LatentMap out = LatentMap::zeros(padded, map.bands, map.channels);
  std::memcpy(out.data.data(), map.data.data(),
              map.data.size() * sizeof(float));
  return out;
}

TokenSequence patchify(const LatentMap& map, int patch) {
  if (patch <= 0) throw GeometryError("patchify: patch size must be positive");
  if (map.frames % patch != 0)
    throw GeometryError("patchify: frame count " + std::to_string(map.frames) +
                        " is not divisible by patch " + std::to_string(patch));
  if (map.bands % patch != 0)
    throw GeometryError("patchify: band count " + std::to_string(map.bands) +
                        " is not divisible by patch " + std::to_string(patch));
  TokenSequence seq;
  seq.geom.patch = patch;
  seq.geom.rows = map.frames / patch;
  seq.geom.cols = map.bands / patch;
  seq.geom.channels = map.channels;
  seq.geom.frames_orig = map.frames;
  seq.tokens.resize(static_cast<int64_t>(seq.geom.count()) * seq.geom.dim());
  int64_t w = 0;
  for (int r = 0; r < seq.geom.rows; ++r)
    for (int ci = 0; ci < seq.geom.cols; ++ci)
      for (int dr = 0; dr < patch; ++dr)
        for (int dc = 0; dc < patch; ++dc)
          for (int ch = 0; ch < map.channels; ++ch)
            seq.tokens[w++] = map.at(r * patch + dr, ci * patch + dc, ch);
  return seq;
}

LatentMap unpatchify(const TokenSequence& seq) {
  const TokenGeometry& g = seq.geom;
  if (g.patch <= 0 || g.rows <= 0 || g.cols <= 0 || g.channels <= 0)
    throw GeometryError("unpatchify: geometry is not set");
  if (static_cast<int64_t>(seq.tokens.size()) !=
      static_cast<int64_t>(g.count()) * g.dim())
    throw GeometryError("unpatchify: token buffer holds " +
                        std::to_string(seq.tokens.size()) +
                        " values, geometry expects " +
                        std::to_string(static_cast<int64_t>(g.count()) * g.dim()));
  LatentMap full = LatentMap::zeros(g.rows * g.patch, g.cols * g.patch,
                                    g.channels);
  int64_t w = 0;
  for (int r = 0; r < g.rows; ++r)
    for (int ci = 0; ci < g.cols; ++ci)
      for (int dr = 0; dr < g.patch; ++dr)
        for (int dc = 0; dc < g.patch; ++dc)
          for (int ch = 0; ch < g.channels; ++ch)
            full.at(r * g.patch + dr, ci * g.patch + dc, ch) = seq.tokens[w++];
  if (g.frames_orig <= 0 || g.frames_orig > full.frames)
    throw GeometryError("unpatchify: original frame count " +
                        std::to_string(g.frames_orig) + " outside padded " +
                        std::to_string(full.frames));
  if (g.frames_orig == full.frames) return full;
  LatentMap trimmed = LatentMap::zeros(g.frames_orig, full.bands,
                                       full.channels);
  std::memcpy(trimmed.data.data(), full.data.data(),
              trimmed.data.size() * sizeof(float));
  return trimmed;
}

TokenSequence encode_latent(const LatentMap& map, int patch, int compression) {
  if (compression <= 0)
    throw GeometryError("encode_latent: compression must be positive");
  int orig = map.frames;
  TokenSequence seq = patchify(pad_frames(map, compression * patch), patch);
  seq.geom.frames_orig = orig;
  return seq;
}

// ---------------------------------------------------------------------------

GaussianArProcess make_gaussian_ar_process(int dim, int classes, double rho,
                                           double sigma, int cond_len,
                                           int cond_dim, uint64_t seed) {
  if (dim <= 0 || classes <= 0 || cond_len < 0 || cond_dim <= 0)
    throw ArgumentError("gaussian-ar: dim, classes and cond_dim must be "
                        "positive");
  if (rho < 0.0 || rho >= 1.0)
    throw ArgumentError("gaussian-ar: rho must lie in [0, 1) so the process "
                        "is stationary");
  if (sigma < 0.0) throw ArgumentError("gaussian-ar: sigma must be >= 0");

  GaussianArProcess p;
  p.dim = dim;
  p.classes = classes;
  p.rho = rho;
  p.sigma = sigma;
  p.cond_len = cond_len;
  p.cond_dim = cond_dim;
  p.seed = seed;

  // Random orthogonal Q by Gram-Schmidt on a Gaussian matrix; A = rho * Q.
  Rng arng(seed, "process-A");
  std::vector<double> q(static_cast<size_t>(dim) * dim);
  for (auto& v : q) v = arng.gaussian();
  for (int i = 0; i < dim; ++i) {
    for (int j = 0; j < i; ++j) {
      double dot = 0;
      for (int c = 0; c < dim; ++c) dot += q[i * dim + c] * q[j * dim + c];
      for (int c = 0; c < dim; ++c) q[i * dim + c] -= dot * q[j * dim + c];
    }
    double norm = 0;
    for (int c = 0; c < dim; ++c) norm += q[i * dim + c] * q[i * dim + c];
    norm = std::sqrt(norm);
    if (norm < 1e-9)
      throw NumericError("gaussian-ar: degenerate random matrix during "
                         "orthogonalization");
    for (int c = 0; c < dim; ++c) q[i * dim + c] /= norm;
  }
  p.A.resize(q.size());
  for (size_t i = 0; i < q.size(); ++i) p.A[i] = rho * q[i];

  Rng brng(seed, "process-bias");
  p.class_bias.resize(static_cast<size_t>(classes) * dim);
  for (auto& v : p.class_bias) v = 0.4 * brng.gaussian();

  Rng crng(seed, "process-cond");
  p.class_cond.resize(static_cast<size_t>(classes) * cond_len * cond_dim);
  for (auto& v : p.class_cond) v = crng.gaussian();
  return p;
}

std::vector<double> gaussian_ar_step(const GaussianArProcess& proc,
                                     const std::vector<double>& x, int k,
                                     const std::vector<double>& eps) {
  if (k < 0 || k >= proc.classes)
    throw RangeError("gaussian-ar: class " + std::to_string(k) + " outside [0, " +
                     std::to_string(proc.classes) + ")");
  if (static_cast<int>(x.size()) != proc.dim ||
      static_cast<int>(eps.size()) != proc.dim)
    throw DimensionError("gaussian-ar: state/noise dim mismatch");
  std::vector<double> out(proc.dim);
  for (int i = 0; i < proc.dim; ++i) {
    double acc = proc.class_bias[static_cast<size_t>(k) * proc.dim + i] +
                 proc.sigma * eps[i];
    for (int j = 0; j < proc.dim; ++j)
      acc += proc.A[static_cast<size_t>(i) * proc.dim + j] * x[j];
    out[i] = acc;
  }
  return out;
}

std::vector<float> sample_gaussian_ar(const GaussianArProcess& proc, int k,
                                      int len, Rng& rng) {
  if (len <= 0) throw ArgumentError("gaussian-ar: length must be positive");
  std::vector<float> seq(static_cast<size_t>(len) * proc.dim);
  std::vector<double> x(proc.dim, 0.0);
  std::vector<double> eps(proc.dim);
  for (int i = 0; i < proc.dim; ++i) {
    eps[i] = rng.gaussian();
    x[i] = proc.class_bias[static_cast<size_t>(k) * proc.dim + i] +
           proc.sigma * eps[i];
  }
  for (int i = 0; i < proc.dim; ++i) seq[i] = static_cast<float>(x[i]);
  for (int t = 1; t < len; ++t) {
    for (auto& e : eps) e = rng.gaussian();
    x = gaussian_ar_step(proc, x, k, eps);
    for (int i = 0; i < proc.dim; ++i)
      seq[static_cast<size_t>(t) * proc.dim + i] = static_cast<float>(x[i]);
  }
  return seq;
}

std::vector<CvtkRecord> sample_gaussian_ar_dataset(
    const GaussianArProcess& proc, int count, int len, uint64_t seed) {
  if (count < 1) throw ArgumentError("gaussian-ar: count must be positive");
  std::vector<CvtkRecord> out(count);
  size_t cond_vals = static_cast<size_t>(proc.cond_len) * proc.cond_dim;
  for (int r = 0; r < count; ++r) {
    int k = r % proc.classes;
    Rng rng(seed, "dataset", static_cast<uint64_t>(r));
    CvtkRecord& rec = out[r];
    rec.token_count = static_cast<uint32_t>(len);
    rec.token_dim = static_cast<uint32_t>(proc.dim);
    rec.cond_len = static_cast<uint32_t>(proc.cond_len);
    rec.cond_dim = static_cast<uint32_t>(proc.cond_dim);
    rec.cond.resize(cond_vals);
    for (size_t i = 0; i < cond_vals; ++i)
      rec.cond[i] =
          static_cast<float>(proc.class_cond[k * cond_vals + i]);
    rec.tokens = sample_gaussian_ar(proc, k, len, rng);
  }
  return out;
}

std::vector<CvtkRecord> sample_sinusoid_map_dataset(
    int frames, int bands, int channels, int patch, int classes, double noise,
    int cond_len, int cond_dim, int count, uint64_t seed) {
  if (frames <= 0 || bands <= 0 || channels <= 0 || patch <= 0)
    throw ArgumentError("sinusoid-map: geometry must be positive");
  if (frames % patch != 0 || bands % patch != 0)
    throw ArgumentError("sinusoid-map: frames and bands must divide by the "
                        "patch size");
  if (classes <= 0 || cond_len < 0 || cond_dim <= 0)
    throw ArgumentError("sinusoid-map: classes and cond_dim must be positive");
  if (noise < 0.0) throw ArgumentError("sinusoid-map: noise must be >= 0");
  if (count < 1) throw ArgumentError("sinusoid-map: count must be positive");

  size_t cond_vals = static_cast<size_t>(cond_len) * cond_dim;
  Rng crng(seed, "sinusoid-cond");
  std::vector<double> class_cond(static_cast<size_t>(classes) * cond_vals);
  for (auto& v : class_cond) v = crng.gaussian();

  std::vector<CvtkRecord> out(count);
  const double tau = 2.0 * M_PI;
  for (int r = 0; r < count; ++r) {
    int k = r % classes;
    Rng rng(seed, "sinusoid", static_cast<uint64_t>(r));
    LatentMap map = LatentMap::zeros(frames, bands, channels);
    double phase = tau * k / classes;
    for (int f = 0; f < frames; ++f)
      for (int b = 0; b < bands; ++b)
        for (int c = 0; c < channels; ++c) {
          double v = std::sin(tau * (k + 1) * f / frames +
                              tau * b / bands + 0.5 * c + phase);
          map.at(f, b, c) =
              static_cast<float>(v + noise * rng.gaussian());
        }
    TokenSequence seq = patchify(map, patch);
    CvtkRecord& rec = out[r];
    rec.token_count = static_cast<uint32_t>(seq.geom.count());
    rec.token_dim = static_cast<uint32_t>(seq.geom.dim());
    rec.cond_len = static_cast<uint32_t>(cond_len);
    rec.cond_dim = static_cast<uint32_t>(cond_dim);
    rec.cond.resize(cond_vals);
    for (size_t i = 0; i < cond_vals; ++i)
      rec.cond[i] = static_cast<float>(class_cond[k * cond_vals + i]);
    rec.tokens = std::move(seq.tokens);
  }
  return out;
}

std::vector<double> gaussian_ar_stationary_mean(const GaussianArProcess& proc,
                                                int k) {
  if (k < 0 || k >= proc.classes)
    throw RangeError("gaussian-ar: class outside range");
  int d = proc.dim;
  // Solve (I - A) mu = b_k by Gaussian elimination with partial pivoting.
  std::vector<double> m(static_cast<size_t>(d) * (d + 1));
  for (int i = 0; i < d; ++i) {
    for (int j = 0; j < d; ++j)
      m[i * (d + 1) + j] = (i == j ? 1.0 : 0.0) - proc.A[i * d + j];
    m[i * (d + 1) + d] = proc.class_bias[static_cast<size_t>(k) * d + i];
  }
  for (int col = 0; col < d; ++col) {
    int piv = col;
    for (int r = col + 1; r < d; ++r)
      if (std::abs(m[r * (d + 1) + col]) > std::abs(m[piv * (d + 1) + col]))
        piv = r;
    if (std::abs(m[piv * (d + 1) + col]) < 1e-12)
      throw NumericError("gaussian-ar: (I - A) is singular");
    if (piv != col)
      for (int j = 0; j <= d; ++j)
        std::swap(m[col * (d + 1) + j], m[piv * (d + 1) + j]);
    for (int r = 0; r < d; ++r) {
      if (r == col) continue;
      double f = m[r * (d + 1) + col] / m[col * (d + 1) + col];
      for (int j = col; j <= d; ++j)
        m[r * (d + 1) + j] -= f * m[col * (d + 1) + j];
    }
  }
  std::vector<double> mu(d);
  for (int i = 0; i < d; ++i) mu[i] = m[i * (d + 1) + d] / m[i * (d + 1) + i];
  return mu;
}

std::vector<double> gaussian_ar_stationary_cov(const GaussianArProcess& proc) {
  int d = proc.dim;
  double s2 = proc.sigma * proc.sigma;
  // Iterate S <- A S A^T + sigma^2 I; contraction factor rho^2 per step.
  std::vector<double> s(static_cast<size_t>(d) * d, 0.0);
  std::vector<double> tmp(s.size()), next(s.size());
  for (int iter = 0; iter < 10000; ++iter) {
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j) {
        double acc = 0;
        for (int c = 0; c < d; ++c) acc += proc.A[i * d + c] * s[c * d + j];
        tmp[i * d + j] = acc;
      }
    double delta = 0;
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j) {
        double acc = (i == j) ? s2 : 0.0;
        for (int c = 0; c < d; ++c) acc += tmp[i * d + c] * proc.A[j * d + c];
        next[i * d + j] = acc;
        delta = std::max(delta, std::abs(acc - s[i * d + j]));
      }
    s.swap(next);
    if (delta < 1e-14) return s;
  }
  throw NumericError("gaussian-ar: stationary covariance iteration did not "
                     "converge");
}

LatentMap sinusoid_map(int frames, int bands, int channels, int k, int r) {
  LatentMap m = LatentMap::zeros(frames, bands, channels);
  double phase = 0.7 * k + 0.13 * r;
  for (int f = 0; f < frames; ++f)
    for (int b = 0; b < bands; ++b)
      for (int c = 0; c < channels; ++c)
        m.at(f, b, c) = static_cast<float>(
            std::sin(0.21 * f + phase + 0.5 * c) *
            std::cos(0.17 * b - 0.3 * c + 0.11 * k));
  return m;
}

}  // namespace mntp
