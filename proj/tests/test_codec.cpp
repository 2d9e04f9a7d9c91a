#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>

#include "mntp/codec.hpp"
#include "mntp/cvtk.hpp"
#include "mntp/errors.hpp"
#include "mntp/rng.hpp"

using namespace mntp;

namespace {

// Dense linear solve, used by the test-side oracles below.
std::vector<double> solve_dense(std::vector<double> m, std::vector<double> rhs) {
  int n = static_cast<int>(rhs.size());
  for (int col = 0; col < n; ++col) {
    int piv = col;
    for (int r = col + 1; r < n; ++r)
      if (std::abs(m[r * n + col]) > std::abs(m[piv * n + col])) piv = r;
    REQUIRE(std::abs(m[piv * n + col]) > 1e-12);
    if (piv != col) {
      for (int j = 0; j < n; ++j) std::swap(m[col * n + j], m[piv * n + j]);
      std::swap(rhs[col], rhs[piv]);
    }
    for (int r = 0; r < n; ++r) {
      if (r == col) continue;
      double f = m[r * n + col] / m[col * n + col];
      for (int j = col; j < n; ++j) m[r * n + j] -= f * m[col * n + j];
      rhs[r] -= f * rhs[col];
    }
  }
  for (int i = 0; i < n; ++i) rhs[i] /= m[i * n + i];
  return rhs;
}

}  // namespace

TEST_CASE("patchify of a 4x4x1 map with patch 4 is the row-major flatten") {
  LatentMap m = LatentMap::zeros(4, 4, 1);
  for (int f = 0; f < 4; ++f)
    for (int b = 0; b < 4; ++b) m.at(f, b, 0) = static_cast<float>(f * 4 + b);
  TokenSequence seq = patchify(m, 4);
  CHECK(seq.geom.count() == 1);
  CHECK(seq.geom.dim() == 16);
  for (int i = 0; i < 16; ++i) CHECK(seq.tokens[i] == static_cast<float>(i));
}

TEST_CASE("token layout follows (patch row, patch col, channel) order") {
  LatentMap m = LatentMap::zeros(2, 2, 2);
  // Encode coordinates into values: value = f*100 + b*10 + c.
  for (int f = 0; f < 2; ++f)
    for (int b = 0; b < 2; ++b)
      for (int c = 0; c < 2; ++c)
        m.at(f, b, c) = static_cast<float>(f * 100 + b * 10 + c);
  TokenSequence seq = patchify(m, 2);
  CHECK(seq.geom.count() == 1);
  std::vector<float> expect = {0, 1, 10, 11, 100, 101, 110, 111};
  for (int i = 0; i < 8; ++i) CHECK(seq.tokens[i] == expect[i]);

  // patch 1: one token per cell, row-major over (frame, band).
  TokenSequence fine = patchify(m, 1);
  CHECK(fine.geom.count() == 4);
  CHECK(fine.geom.dim() == 2);
  CHECK(fine.tokens[0] == 0.0f);
  CHECK(fine.tokens[1] == 1.0f);
  CHECK(fine.tokens[2] == 10.0f);
  CHECK(fine.tokens[6] == 110.0f);
}

TEST_CASE("geometry errors name the failing extent") {
  LatentMap m = LatentMap::zeros(6, 4, 1);
  CHECK_THROWS_WITH_AS(patchify(m, 4),
                       doctest::Contains("frame count 6"), GeometryError);
  LatentMap m2 = LatentMap::zeros(4, 6, 1);
  CHECK_THROWS_WITH_AS(patchify(m2, 4),
                       doctest::Contains("band count 6"), GeometryError);
  CHECK_THROWS_AS(patchify(m, 0), GeometryError);
  CHECK_THROWS_AS(LatentMap::zeros(0, 4, 1), GeometryError);
}

TEST_CASE("frame padding reaches the next quantum and preserves content") {
  LatentMap m = LatentMap::zeros(250, 16, 8);
  Rng rng(1, "pad-content");
  for (auto& v : m.data) v = static_cast<float>(rng.gaussian());
  LatentMap padded = pad_frames(m, 16);
  CHECK(padded.frames == 256);
  CHECK(std::memcmp(padded.data.data(), m.data.data(),
                    m.data.size() * sizeof(float)) == 0);
  for (size_t i = m.data.size(); i < padded.data.size(); ++i)
    CHECK(padded.data[i] == 0.0f);
  // Already aligned: no-op.
  CHECK(pad_frames(padded, 16).frames == 256);
}

TEST_CASE("reference geometry: 1000 raw frames yield 256 tokens of dim 128") {
  // Temporal compression 4 maps 1000 frames to a 250-frame latent; padding
  // to the 16-frame quantum then gives 256 latent frames.
  CHECK(1000 / 4 == 250);
  LatentMap latent = LatentMap::zeros(250, 16, 8);
  Rng rng(2, "ref-geom");
  for (auto& v : latent.data) v = static_cast<float>(rng.gaussian());
  TokenSequence seq = encode_latent(latent, 4, 4);
  CHECK(seq.geom.count() == 256);
  CHECK(seq.geom.dim() == 128);
  CHECK(seq.geom.rows == 64);
  CHECK(seq.geom.cols == 4);
  LatentMap back = unpatchify(seq);
  CHECK(back.frames == 250);
  CHECK(std::memcmp(back.data.data(), latent.data.data(),
                    latent.data.size() * sizeof(float)) == 0);
}

TEST_CASE("round trips are bit-exact over fuzzed geometries") {
  Rng geo(3, "fuzz-geometry");
  for (int it = 0; it < 100; ++it) {
    int patch = 1 + static_cast<int>(geo.below(5));
    int rows = 1 + static_cast<int>(geo.below(9));
    int cols = 1 + static_cast<int>(geo.below(9));
    int channels = 1 + static_cast<int>(geo.below(8));
    // Sometimes leave frames unaligned so the padding path is exercised.
    int frames = rows * patch - ((it % 3 == 0 && rows * patch > 1)
                                     ? static_cast<int>(geo.below(patch))
                                     : 0);
    LatentMap m = LatentMap::zeros(frames, cols * patch, channels);
    Rng content(3, "fuzz-content", it);
    for (auto& v : m.data) v = static_cast<float>(content.gaussian());
    TokenSequence seq = encode_latent(m, patch, 1);
    CHECK(seq.geom.count() == rows * cols);
    CHECK(seq.geom.dim() == channels * patch * patch);
    LatentMap back = unpatchify(seq);
    REQUIRE(back.frames == m.frames);
    REQUIRE(back.data.size() == m.data.size());
    CHECK(std::memcmp(back.data.data(), m.data.data(),
                      m.data.size() * sizeof(float)) == 0);
  }
}

TEST_CASE("sinusoid maps are deterministic and class-distinct") {
  LatentMap a = sinusoid_map(8, 4, 2, 0, 0);
  LatentMap b = sinusoid_map(8, 4, 2, 0, 0);
  CHECK(std::memcmp(a.data.data(), b.data.data(),
                    a.data.size() * sizeof(float)) == 0);
  LatentMap c = sinusoid_map(8, 4, 2, 1, 0);
  CHECK(std::memcmp(a.data.data(), c.data.data(),
                    a.data.size() * sizeof(float)) != 0);
}

// ---------------------------------------------------------------------------
// Gaussian AR process

TEST_CASE("the AR matrix is rho times an orthogonal matrix") {
  auto proc = make_gaussian_ar_process(4, 3, 0.5, 0.35, 2, 8, 11);
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) {
      double dot = 0;
      for (int c = 0; c < 4; ++c)
        dot += proc.A[i * 4 + c] * proc.A[j * 4 + c];
      CHECK(dot == doctest::Approx(i == j ? 0.25 : 0.0).epsilon(1e-10));
    }
}

TEST_CASE("deviation from the stationary mean contracts by exactly rho") {
  auto proc = make_gaussian_ar_process(4, 2, 0.6, 0.0, 2, 8, 13);
  auto mu = gaussian_ar_stationary_mean(proc, 1);
  std::vector<double> x = {1.3, -0.2, 0.8, 2.1};
  std::vector<double> zero(4, 0.0);
  double dev = 0;
  for (int i = 0; i < 4; ++i) dev += (x[i] - mu[i]) * (x[i] - mu[i]);
  dev = std::sqrt(dev);
  for (int t = 0; t < 20; ++t) {
    x = gaussian_ar_step(proc, x, 1, zero);
    double d = 0;
    for (int i = 0; i < 4; ++i) d += (x[i] - mu[i]) * (x[i] - mu[i]);
    CHECK(std::sqrt(d) == doctest::Approx(dev * std::pow(0.6, t + 1))
                              .epsilon(1e-9));
  }
}

TEST_CASE("stationary mean agrees with the power-series oracle") {
  auto proc = make_gaussian_ar_process(5, 3, 0.7, 0.3, 2, 8, 17);
  for (int k = 0; k < 3; ++k) {
    auto mu = gaussian_ar_stationary_mean(proc, k);
    // Independent route: mu = sum_j A^j b, truncated far past convergence.
    std::vector<double> acc(5, 0.0), term(5);
    for (int i = 0; i < 5; ++i)
      term[i] = proc.class_bias[static_cast<size_t>(k) * 5 + i];
    for (int j = 0; j < 400; ++j) {
      for (int i = 0; i < 5; ++i) acc[i] += term[i];
      std::vector<double> next(5, 0.0);
      for (int i = 0; i < 5; ++i)
        for (int c = 0; c < 5; ++c) next[i] += proc.A[i * 5 + c] * term[c];
      term = next;
    }
    for (int i = 0; i < 5; ++i)
      CHECK(mu[i] == doctest::Approx(acc[i]).epsilon(1e-10));
  }
}

TEST_CASE("stationary covariance matches the Kronecker-system oracle") {
  auto proc = make_gaussian_ar_process(4, 2, 0.5, 0.35, 2, 8, 19);
  auto cov = gaussian_ar_stationary_cov(proc);
  // Independent route: solve (I - A (x) A) vec(S) = sigma^2 vec(I) directly.
  int d = 4, n = d * d;
  std::vector<double> m(static_cast<size_t>(n) * n, 0.0), rhs(n, 0.0);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) {
      int row = i * d + j;
      rhs[row] = (i == j) ? proc.sigma * proc.sigma : 0.0;
      for (int k = 0; k < d; ++k)
        for (int l = 0; l < d; ++l) {
          int col = k * d + l;
          m[row * n + col] = (row == col ? 1.0 : 0.0) -
                             proc.A[i * d + k] * proc.A[j * d + l];
        }
    }
  auto vec_s = solve_dense(std::move(m), std::move(rhs));
  for (int i = 0; i < n; ++i)
    CHECK(cov[i] == doctest::Approx(vec_s[i]).epsilon(1e-9));
}

TEST_CASE("rho = 0 degenerates to iid draws around the class bias") {
  auto proc = make_gaussian_ar_process(3, 2, 0.0, 0.4, 2, 8, 23);
  Rng rng(23, "sample", 0);
  auto seq = sample_gaussian_ar(proc, 0, 20000, rng);
  std::vector<double> mean(3, 0.0);
  for (int t = 0; t < 20000; ++t)
    for (int i = 0; i < 3; ++i) mean[i] += seq[t * 3 + i];
  for (auto& v : mean) v /= 20000;
  double lag1 = 0, var = 0;
  for (int t = 0; t + 1 < 20000; ++t)
    for (int i = 0; i < 3; ++i) {
      lag1 += (seq[t * 3 + i] - mean[i]) * (seq[(t + 1) * 3 + i] - mean[i]);
      var += (seq[t * 3 + i] - mean[i]) * (seq[t * 3 + i] - mean[i]);
    }
  for (int i = 0; i < 3; ++i)
    CHECK(mean[i] == doctest::Approx(proc.class_bias[i]).epsilon(0.05));
  CHECK(var / (3 * 19999) == doctest::Approx(0.16).epsilon(0.05));
  CHECK(std::abs(lag1 / var) < 0.02);
}

TEST_CASE("long-run sample moments approach the stationary solution") {
  auto proc = make_gaussian_ar_process(4, 3, 0.5, 0.35, 2, 8, 29);
  auto mu = gaussian_ar_stationary_mean(proc, 2);
  auto cov = gaussian_ar_stationary_cov(proc);
  Rng rng(29, "sample-long");
  const int len = 60000, burn = 100;
  auto seq = sample_gaussian_ar(proc, 2, len, rng);
  std::vector<double> m(4, 0.0);
  for (int t = burn; t < len; ++t)
    for (int i = 0; i < 4; ++i) m[i] += seq[t * 4 + i];
  for (auto& v : m) v /= (len - burn);
  for (int i = 0; i < 4; ++i) CHECK(m[i] == doctest::Approx(mu[i]).epsilon(0.1));
  std::vector<double> c(16, 0.0);
  for (int t = burn; t < len; ++t)
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 4; ++j)
        c[i * 4 + j] += (seq[t * 4 + i] - m[i]) * (seq[t * 4 + j] - m[j]);
  for (auto& v : c) v /= (len - burn - 1);
  for (int i = 0; i < 16; ++i)
    CHECK(c[i] == doctest::Approx(cov[i]).epsilon(0.08).scale(0.2));
}

TEST_CASE("lag-1 least squares on samples recovers the AR matrix") {
  auto proc = make_gaussian_ar_process(4, 1, 0.5, 0.35, 2, 8, 31);
  Rng rng(31, "sample-lsq");
  const int len = 40000;
  auto seq = sample_gaussian_ar(proc, 0, len, rng);
  std::vector<double> mean(4, 0.0);
  for (int t = 0; t < len; ++t)
    for (int i = 0; i < 4; ++i) mean[i] += seq[t * 4 + i];
  for (auto& v : mean) v /= len;
  // C1 = sum x~_{t+1} x~_t^T, C0 = sum x~_t x~_t^T; A_hat = C1 C0^{-1}.
  std::vector<double> c0(16, 0.0), c1(16, 0.0);
  for (int t = 0; t + 1 < len; ++t)
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 4; ++j) {
        double xi = seq[t * 4 + i] - mean[i];
        double xj = seq[t * 4 + j] - mean[j];
        double yi = seq[(t + 1) * 4 + i] - mean[i];
        c0[i * 4 + j] += xi * xj;
        c1[i * 4 + j] += yi * xj;
      }
  // Solve A_hat C0 = C1 row by row: C0^T a_i^T = c1_i^T (C0 symmetric).
  double err = 0;
  for (int i = 0; i < 4; ++i) {
    std::vector<double> rhs(4);
    for (int j = 0; j < 4; ++j) rhs[j] = c1[i * 4 + j];
    auto row = solve_dense(c0, rhs);
    for (int j = 0; j < 4; ++j) {
      double d = row[j] - proc.A[i * 4 + j];
      err += d * d;
    }
  }
  CHECK(std::sqrt(err) < 0.05);
}

TEST_CASE("process construction and sampling are deterministic in the seed") {
  auto p1 = make_gaussian_ar_process(4, 3, 0.5, 0.35, 2, 8, 37);
  auto p2 = make_gaussian_ar_process(4, 3, 0.5, 0.35, 2, 8, 37);
  CHECK(p1.A == p2.A);
  CHECK(p1.class_bias == p2.class_bias);
  CHECK(p1.class_cond == p2.class_cond);
  Rng r1(37, "sample", 5), r2(37, "sample", 5);
  CHECK(sample_gaussian_ar(p1, 1, 32, r1) == sample_gaussian_ar(p2, 1, 32, r2));
  auto p3 = make_gaussian_ar_process(4, 3, 0.5, 0.35, 2, 8, 38);
  CHECK(p1.A != p3.A);
}

// ---------------------------------------------------------------------------
// CVTK container

TEST_CASE("CVTK round trip preserves every bit") {
  std::vector<CvtkRecord> recs;
  Rng rng(41, "cvtk");
  for (int i = 0; i < 5; ++i) {
    CvtkRecord r;
    r.token_count = 3 + i;
    r.token_dim = 4;
    r.cond_len = 2;
    r.cond_dim = 8;
    r.cond.resize(16);
    r.tokens.resize(static_cast<size_t>(r.token_count) * 4);
    for (auto& v : r.cond) v = static_cast<float>(rng.gaussian());
    for (auto& v : r.tokens) v = static_cast<float>(rng.gaussian());
    recs.push_back(std::move(r));
  }
  recs[1].tokens[0] = -0.0f;  // signed zero must survive
  const char* path = "cvtk_roundtrip.bin";
  write_cvtk(path, recs);
  auto back = read_cvtk(path);
  REQUIRE(back.size() == recs.size());
  for (size_t i = 0; i < recs.size(); ++i) {
    CHECK(back[i].token_count == recs[i].token_count);
    CHECK(back[i].token_dim == recs[i].token_dim);
    CHECK(std::memcmp(back[i].tokens.data(), recs[i].tokens.data(),
                      recs[i].tokens.size() * sizeof(float)) == 0);
    CHECK(std::memcmp(back[i].cond.data(), recs[i].cond.data(),
                      recs[i].cond.size() * sizeof(float)) == 0);
  }
  std::remove(path);
}

TEST_CASE("CVTK format errors carry the byte offset") {
  const char* path = "cvtk_bad.bin";

  SUBCASE("bad magic at offset 0") {
    std::ofstream(path, std::ios::binary) << "JUNKxxxx";
    try {
      read_cvtk(path);
      FAIL("expected FormatError");
    } catch (const FormatError& e) {
      CHECK(e.byte_offset == 0);
    }
  }
  SUBCASE("unsupported version at offset 4") {
    std::string buf = "CVTK";
    buf += std::string("\x07\x00\x00\x00", 4);
    buf += std::string("\x00\x00\x00\x00", 4);
    std::ofstream(path, std::ios::binary) << buf;
    try {
      read_cvtk(path);
      FAIL("expected FormatError");
    } catch (const FormatError& e) {
      CHECK(e.byte_offset == 4);
    }
  }
  SUBCASE("truncated token payload reports the cut point") {
    CvtkRecord r;
    r.token_count = 2;
    r.token_dim = 3;
    r.cond_len = 0;
    r.cond_dim = 1;
    r.tokens.assign(6, 1.0f);
    write_cvtk(path, {r});
    std::ifstream in(path, std::ios::binary);
    std::string buf((std::istreambuf_iterator<char>(in)),
                    std::istreambuf_iterator<char>());
    buf.resize(buf.size() - 5);
    std::ofstream(path, std::ios::binary) << buf;
    try {
      read_cvtk(path);
      FAIL("expected FormatError");
    } catch (const FormatError& e) {
      // Payload starts after 12 header + 16 record-header bytes.
      CHECK(e.byte_offset == 28);
      CHECK(std::string(e.what()).find("token values") != std::string::npos);
    }
  }
  SUBCASE("trailing bytes are rejected") {
    CvtkRecord r;
    r.token_count = 1;
    r.token_dim = 1;
    r.cond_len = 0;
    r.cond_dim = 1;
    r.tokens.assign(1, 2.0f);
    write_cvtk(path, {r});
    std::ofstream app(path, std::ios::binary | std::ios::app);
    app << "zz";
    app.close();
    try {
      read_cvtk(path);
      FAIL("expected FormatError");
    } catch (const FormatError& e) {
      CHECK(e.byte_offset == 32);
    }
  }
  std::remove(path);
}

TEST_CASE("homogeneity check flags mismatched records") {
  CvtkRecord a;
  a.token_count = 2;
  a.token_dim = 4;
  a.cond_len = 1;
  a.cond_dim = 2;
  a.cond.assign(2, 0.0f);
  a.tokens.assign(8, 0.0f);
  CvtkRecord b = a;
  b.token_dim = 5;
  b.tokens.assign(10, 0.0f);
  CHECK_THROWS_WITH_AS(require_homogeneous({a, b}),
                       doctest::Contains("record 1"), Error);
  auto dims = require_homogeneous({a, a});
  CHECK(dims.token_dim == 4);
}

TEST_CASE("sinusoid-map datasets are reproducible codec output") {
  auto data = sample_sinusoid_map_dataset(8, 8, 2, 4, 3, 0.05, 2, 3, 7, 99);
  REQUIRE(data.size() == 7);
  for (size_t r = 0; r < data.size(); ++r) {
    CHECK(data[r].token_count == 4);   // (8/4) * (8/4)
    CHECK(data[r].token_dim == 32);    // 2 * 4 * 4
    CHECK(data[r].cond.size() == 6);
    for (float v : data[r].tokens) CHECK(std::isfinite(v));
  }
  // Round-robin classes share conditions.
  CHECK(data[0].cond == data[3].cond);
  CHECK(data[0].cond != data[1].cond);
  auto again = sample_sinusoid_map_dataset(8, 8, 2, 4, 3, 0.05, 2, 3, 7, 99);
  CHECK(again[5].tokens == data[5].tokens);
  auto other = sample_sinusoid_map_dataset(8, 8, 2, 4, 3, 0.05, 2, 3, 7, 98);
  CHECK(other[5].tokens != data[5].tokens);

  CHECK_THROWS_AS(sample_sinusoid_map_dataset(9, 8, 2, 4, 3, 0.0, 2, 3, 1, 1),
                  ArgumentError);
  CHECK_THROWS_AS(sample_sinusoid_map_dataset(8, 8, 2, 4, 3, -0.1, 2, 3, 1, 1),
                  ArgumentError);
}
