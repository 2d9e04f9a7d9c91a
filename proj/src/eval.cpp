#include "mntp/eval.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <map>

#include <cblas.h>

namespace mntp {

namespace {

// dim x dim row-major double product c = a * b.
void matmul_dd(const std::vector<double>& a, const std::vector<double>& b,
               std::vector<double>& c, int n) {
  c.assign(static_cast<size_t>(n) * n, 0.0);
  cblas_dgemm(CblasRowMajor, CblasNoTrans, CblasNoTrans, n, n, n, 1.0,
              a.data(), n, b.data(), n, 0.0, c.data(), n);
}

void symmetrize(std::vector<double>& m, int n) {
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      double v = 0.5 * (m[static_cast<size_t>(i) * n + j] +
                        m[static_cast<size_t>(j) * n + i]);
      m[static_cast<size_t>(i) * n + j] = v;
      m[static_cast<size_t>(j) * n + i] = v;
    }
}

// V f(diag) V^T for a spectral function applied to clamped eigenvalues.
std::vector<double> spectral_apply(const std::vector<double>& vecs,
                                   const std::vector<double>& vals, int n,
                                   double (*f)(double)) {
  std::vector<double> scaled(static_cast<size_t>(n) * n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      scaled[static_cast<size_t>(i) * n + j] =
          vecs[static_cast<size_t>(i) * n + j] * f(std::max(vals[j], 0.0));
  std::vector<double> out(static_cast<size_t>(n) * n, 0.0);
  cblas_dgemm(CblasRowMajor, CblasNoTrans, CblasTrans, n, n, n, 1.0,
              scaled.data(), n, vecs.data(), n, 0.0, out.data(), n);
  return out;
}

void check_cov(const GaussianStats& s, const char* who) {
  int n = s.dim;
  if (n < 1 || static_cast<int>(s.mean.size()) != n ||
      static_cast<int>(s.cov.size()) != n * n)
    throw DimensionError(std::string("frechet: malformed stats for ") + who);
  if (s.count < n + 1)
    throw ArgumentError(std::string("frechet: ") + who + " needs at least " +
                        std::to_string(n + 1) + " samples");
  double scale = 0.0;
  for (double v : s.cov) scale = std::max(scale, std::abs(v));
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      if (std::abs(s.cov[static_cast<size_t>(i) * n + j] -
                   s.cov[static_cast<size_t>(j) * n + i]) >
          1e-8 * std::max(1.0, scale))
        throw ArgumentError(std::string("frechet: covariance of ") + who +
                            " is not symmetric");
}

uint64_t record_key(const CvtkRecord& rec) {
  // FNV-1a over the record's bytes; identifies a record by content so
  // held-out draws survive dataset reordering.
  uint64_t h = 1469598103934665603ull;
  auto mix = [&h](const void* p, size_t bytes) {
    const unsigned char* c = static_cast<const unsigned char*>(p);
    for (size_t i = 0; i < bytes; ++i) {
      h ^= c[i];
      h *= 1099511628211ull;
    }
  };
  uint32_t dims[4] = {rec.token_count, rec.token_dim, rec.cond_len,
                      rec.cond_dim};
  mix(dims, sizeof(dims));
  mix(rec.cond.data(), rec.cond.size() * sizeof(float));
  mix(rec.tokens.data(), rec.tokens.size() * sizeof(float));
  return h;
}

int classify_record(const CvtkRecord& rec, const GaussianArProcess& proc) {
  if (proc.classes == 1) return 0;
  size_t per = static_cast<size_t>(proc.cond_len) * proc.cond_dim;
  if (per == 0)
    throw ArgumentError("oracle: cannot infer classes without conditions");
  if (rec.cond.size() != per)
    throw DimensionError("oracle: record condition does not match process");
  int best = 0;
  double best_d = 0.0;
  for (int k = 0; k < proc.classes; ++k) {
    double d = 0.0;
    for (size_t i = 0; i < per; ++i) {
      double diff = static_cast<double>(rec.cond[i]) -
                    proc.class_cond[static_cast<size_t>(k) * per + i];
      d += diff * diff;
    }
    if (k == 0 || d < best_d) {
      best = k;
      best_d = d;
    }
  }
  return best;
}

void check_token_dims(const std::vector<CvtkRecord>& records,
                      const char* who) {
  if (records.empty())
    throw ArgumentError(std::string(who) + ": no records");
  for (const auto& rec : records) {
    if (rec.token_dim != records[0].token_dim)
      throw DimensionError(std::string(who) +
                           ": records disagree on token dimension");
    if (rec.token_count == 0)
      throw ArgumentError(std::string(who) + ": empty record");
  }
}

}  // namespace

void jacobi_eigensymm(const std::vector<double>& a, int n,
                      std::vector<double>& vecs, std::vector<double>& vals) {
  if (n < 1 || static_cast<int>(a.size()) != n * n)
    throw DimensionError("eig: matrix must be n*n with n >= 1");
  std::vector<double> m = a;
  symmetrize(m, n);
  vecs.assign(static_cast<size_t>(n) * n, 0.0);
  for (int i = 0; i < n; ++i) vecs[static_cast<size_t>(i) * n + i] = 1.0;

  double norm = 0.0;
  for (double v : m) norm += v * v;
  norm = std::sqrt(norm);
  double tol = 1e-14 * std::max(norm, 1e-300);

  for (int sweep = 0; sweep < 64; ++sweep) {
    double off = 0.0;
    for (int p = 0; p < n; ++p)
      for (int q = p + 1; q < n; ++q) {
        double v = m[static_cast<size_t>(p) * n + q];
        off += v * v;
      }
    if (std::sqrt(2.0 * off) <= tol) break;
    for (int p = 0; p < n; ++p)
      for (int q = p + 1; q < n; ++q) {
        double apq = m[static_cast<size_t>(p) * n + q];
        if (apq == 0.0) continue;
        double app = m[static_cast<size_t>(p) * n + p];
        double aqq = m[static_cast<size_t>(q) * n + q];
        double theta = (aqq - app) / (2.0 * apq);
        double t = (theta >= 0.0 ? 1.0 : -1.0) /
                   (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        double c = 1.0 / std::sqrt(t * t + 1.0);
        double s = t * c;
        m[static_cast<size_t>(p) * n + p] = app - t * apq;
        m[static_cast<size_t>(q) * n + q] = aqq + t * apq;
        m[static_cast<size_t>(p) * n + q] = 0.0;
        m[static_cast<size_t>(q) * n + p] = 0.0;
        for (int k = 0; k < n; ++k) {
          if (k != p && k != q) {
            double akp = m[static_cast<size_t>(k) * n + p];
            double akq = m[static_cast<size_t>(k) * n + q];
            m[static_cast<size_t>(k) * n + p] = c * akp - s * akq;
            m[static_cast<size_t>(p) * n + k] = c * akp - s * akq;
            m[static_cast<size_t>(k) * n + q] = s * akp + c * akq;
            m[static_cast<size_t>(q) * n + k] = s * akp + c * akq;
          }
          double vkp = vecs[static_cast<size_t>(k) * n + p];
          double vkq = vecs[static_cast<size_t>(k) * n + q];
          vecs[static_cast<size_t>(k) * n + p] = c * vkp - s * vkq;
          vecs[static_cast<size_t>(k) * n + q] = s * vkp + c * vkq;
        }
      }
  }

  vals.resize(n);
  std::vector<int> order(n);
  for (int i = 0; i < n; ++i) order[i] = i;
  std::vector<double> diag(n);
  for (int i = 0; i < n; ++i) diag[i] = m[static_cast<size_t>(i) * n + i];
  std::sort(order.begin(), order.end(),
            [&diag](int x, int y) { return diag[x] < diag[y]; });
  std::vector<double> sorted(static_cast<size_t>(n) * n);
  for (int j = 0; j < n; ++j) {
    vals[j] = diag[order[j]];
    for (int i = 0; i < n; ++i)
      sorted[static_cast<size_t>(i) * n + j] =
          vecs[static_cast<size_t>(i) * n + order[j]];
  }
  vecs = std::move(sorted);
}

GaussianStats fit_gaussian(const std::vector<double>& rows, int count,
                           int dim) {
  if (dim < 1) throw ArgumentError("stats: dimension must be positive");
  if (count < 2) throw ArgumentError("stats: need at least two samples");
  if (static_cast<int>(rows.size()) != count * dim)
    throw DimensionError("stats: rows must be count*dim values");
  GaussianStats s;
  s.dim = dim;
  s.count = count;
  s.mean.assign(dim, 0.0);
  for (int r = 0; r < count; ++r)
    for (int i = 0; i < dim; ++i)
      s.mean[i] += rows[static_cast<size_t>(r) * dim + i];
  for (double& v : s.mean) v /= count;
  s.cov.assign(static_cast<size_t>(dim) * dim, 0.0);
  std::vector<double> d(dim);
  for (int r = 0; r < count; ++r) {
    for (int i = 0; i < dim; ++i)
      d[i] = rows[static_cast<size_t>(r) * dim + i] - s.mean[i];
    for (int i = 0; i < dim; ++i)
      for (int j = 0; j < dim; ++j)
        s.cov[static_cast<size_t>(i) * dim + j] += d[i] * d[j];
  }
  for (double& v : s.cov) v /= (count - 1);
  return s;
}

GaussianStats fit_token_gaussian(const std::vector<CvtkRecord>& records) {
  check_token_dims(records, "stats");
  int dim = static_cast<int>(records[0].token_dim);
  std::vector<double> rows;
  int64_t count = 0;
  for (const auto& rec : records) count += rec.token_count;
  rows.reserve(static_cast<size_t>(count) * dim);
  for (const auto& rec : records)
    for (float v : rec.tokens) rows.push_back(static_cast<double>(v));
  return fit_gaussian(rows, static_cast<int>(count), dim);
}

double frechet_distance(const GaussianStats& a, const GaussianStats& b) {
  if (a.dim != b.dim)
    throw ArgumentError("frechet: dimension mismatch (" +
                        std::to_string(a.dim) + " vs " +
                        std::to_string(b.dim) + ")");
  check_cov(a, "a");
  check_cov(b, "b");
  int n = a.dim;

  std::vector<double> va, la, sqrt_a;
  jacobi_eigensymm(a.cov, n, va, la);
  sqrt_a = spectral_apply(va, la, n, [](double x) { return std::sqrt(x); });

  std::vector<double> tmp, inner;
  matmul_dd(sqrt_a, b.cov, tmp, n);
  matmul_dd(tmp, sqrt_a, inner, n);
  symmetrize(inner, n);
  std::vector<double> vi, li;
  jacobi_eigensymm(inner, n, vi, li);

  double mean_term = 0.0;
  for (int i = 0; i < n; ++i) {
    double d = a.mean[i] - b.mean[i];
    mean_term += d * d;
  }
  double trace = 0.0;
  for (int i = 0; i < n; ++i) {
    trace += a.cov[static_cast<size_t>(i) * n + i];
    trace += b.cov[static_cast<size_t>(i) * n + i];
    trace -= 2.0 * std::sqrt(std::max(li[i], 0.0));
  }
  return std::max(mean_term + trace, 0.0);
}

double heldout_diffusion_loss(const ModelState<float>& state,
                              const TrainConfig& train,
                              const NoiseSchedule& sched,
                              const std::vector<CvtkRecord>& records,
                              uint64_t seed, int reps) {
  if (reps < 1) throw ArgumentError("heldout: reps must be positive");
  check_token_dims(records, "heldout");
  StepProfile prof = step_profile(train, train.steps);
  if (prof.attention == AttentionMode::bidirectional ||
      prof.predict == PredictMode::masked)
    throw CapabilityError("heldout: teacher forcing needs a causal "
                          "next/skip model");
  const ModelConfig& cfg = state.cfg;

  // Per-record partial sums keyed by content hash; summing in key order
  // makes the result independent of record order.
  std::vector<std::pair<uint64_t, double>> parts;
  parts.reserve(records.size());
  int64_t total_slots = 0;
  NoGradGuard guard;
  for (const auto& rec : records) {
    int n = static_cast<int>(rec.token_count);
    if (static_cast<int>(rec.token_dim) != cfg.token_dim)
      throw DimensionError("heldout: record token dimension does not match "
                           "the model");
    if (n > cfg.max_seq)
      throw RangeError("heldout: record longer than max_seq");
    uint64_t key = record_key(rec);

    SeqInput q;
    q.n = n;
    q.cond = fit_condition(rec.cond, cfg.cond_len, cfg.cond_dim);
    q.tokens = rec.tokens;
    q.content_idx.resize(n);
    for (int j = 0; j < n; ++j) q.content_idx[j] = j;
    // Full clean context: the start slot predicts position 0 and content
    // slot j predicts j + 1; the last slot predicts nothing.
    q.target_idx.resize(n + 1);
    for (int j = 0; j <= n; ++j) q.target_idx[j] = j;

    EncodeOut<float> out = encode_batch(state, {q}, prof.attention);
    int m = n * reps;
    std::vector<int> rows(m);
    std::vector<float> targets(static_cast<size_t>(m) * cfg.token_dim);
    std::vector<int> ts(m);
    std::vector<float> eps(targets.size());
    for (int r = 0; r < reps; ++r) {
      Rng rng(seed, "heldout", key, static_cast<uint64_t>(r));
      for (int sidx = 0; sidx < n; ++sidx) {
        int at = r * n + sidx;
        rows[at] = out.start_row(0) + sidx;
        std::copy_n(rec.tokens.data() + static_cast<size_t>(sidx) *
                                            cfg.token_dim,
                    cfg.token_dim,
                    targets.data() + static_cast<size_t>(at) * cfg.token_dim);
        ts[at] = 1 + static_cast<int>(
                         rng.below(static_cast<uint64_t>(sched.T)));
        for (int c = 0; c < cfg.token_dim; ++c)
          eps[static_cast<size_t>(at) * cfg.token_dim + c] =
              static_cast<float>(rng.gaussian());
      }
    }
    Tensor<float> z = gather_rows(out.z, rows);
    Tensor<float> per_slot =
        head_loss_slots(state.head, sched, z, targets, ts, eps);
    double rec_sum = 0.0;
    for (float v : per_slot.vals()) rec_sum += static_cast<double>(v);
    parts.emplace_back(key, rec_sum);
    total_slots += m;
  }
  std::sort(parts.begin(), parts.end(),
            [](const auto& x, const auto& y) { return x.first < y.first; });
  double total = 0.0;
  for (const auto& [key, v] : parts) total += v;
  return total / static_cast<double>(total_slots);
}

double measure_rtf(const ModelState<float>& state, const NoiseSchedule& sched,
                   const DecodePolicy& policy, int n, double clip_seconds,
                   int runs) {
  if (clip_seconds <= 0.0)
    throw ArgumentError("rtf: clip duration must be positive");
  if (runs < 1) throw ArgumentError("rtf: need at least one run");
  std::vector<std::vector<float>> conds = {{}};
  std::vector<uint64_t> ids = {0};
  auto once = [&] { decode_causal(state, sched, policy, conds, n, 9, ids); };
  once();  // warm-up, untimed
  std::vector<double> times(runs);
  for (int r = 0; r < runs; ++r) {
    auto t0 = std::chrono::steady_clock::now();
    once();
    auto t1 = std::chrono::steady_clock::now();
    times[r] = std::chrono::duration<double>(t1 - t0).count();
  }
  std::sort(times.begin(), times.end());
  double med = (runs % 2 == 1)
                   ? times[runs / 2]
                   : 0.5 * (times[runs / 2 - 1] + times[runs / 2]);
  return med / clip_seconds;
}

std::vector<double> ar_fit_lag1(const std::vector<CvtkRecord>& records) {
  check_token_dims(records, "oracle");
  int dim = static_cast<int>(records[0].token_dim);

  // Condition groups share an intercept; centering each group on its own
  // lag-0/lag-1 means absorbs it exactly.
  struct Group {
    int64_t pairs = 0;
    std::vector<double> su, sv;
  };
  auto cond_key = [](const CvtkRecord& rec) {
    return std::string(reinterpret_cast<const char*>(rec.cond.data()),
                       rec.cond.size() * sizeof(float));
  };
  std::map<std::string, Group> groups;
  for (const auto& rec : records) {
    Group& g = groups[cond_key(rec)];
    if (g.su.empty()) {
      g.su.assign(dim, 0.0);
      g.sv.assign(dim, 0.0);
    }
    int n = static_cast<int>(rec.token_count);
    for (int t = 0; t + 1 < n; ++t) {
      for (int i = 0; i < dim; ++i) {
        g.su[i] += rec.tokens[static_cast<size_t>(t) * dim + i];
        g.sv[i] += rec.tokens[static_cast<size_t>(t + 1) * dim + i];
      }
      ++g.pairs;
    }
  }
  int64_t pairs = 0;
  for (auto& [key, g] : groups) {
    pairs += g.pairs;
    if (g.pairs > 0)
      for (int i = 0; i < dim; ++i) {
        g.su[i] /= static_cast<double>(g.pairs);
        g.sv[i] /= static_cast<double>(g.pairs);
      }
  }
  if (pairs < dim + 1)
    throw ArgumentError("oracle: not enough lag-1 pairs for a fit");

  std::vector<double> sxx(static_cast<size_t>(dim) * dim, 0.0);
  std::vector<double> sxy(sxx.size(), 0.0);
  std::vector<double> u(dim), v(dim);
  for (const auto& rec : records) {
    const Group& g = groups[cond_key(rec)];
    int n = static_cast<int>(rec.token_count);
    for (int t = 0; t + 1 < n; ++t) {
      for (int i = 0; i < dim; ++i) {
        u[i] = rec.tokens[static_cast<size_t>(t) * dim + i] - g.su[i];
        v[i] = rec.tokens[static_cast<size_t>(t + 1) * dim + i] - g.sv[i];
      }
      for (int i = 0; i < dim; ++i)
        for (int j = 0; j < dim; ++j) {
          sxx[static_cast<size_t>(i) * dim + j] += u[i] * u[j];
          sxy[static_cast<size_t>(i) * dim + j] += v[i] * u[j];
        }
    }
  }

  std::vector<double> vecs, vals;
  jacobi_eigensymm(sxx, dim, vecs, vals);
  double vmax = std::max(vals.back(), 0.0);
  if (vmax <= 0.0 || vals.front() < 1e-12 * vmax)
    throw NumericError("oracle: lag-0 moment matrix is singular");
  std::vector<double> inv = spectral_apply(vecs, vals, dim,
                                           [](double x) { return 1.0 / x; });
  std::vector<double> a_hat;
  matmul_dd(sxy, inv, a_hat, dim);
  return a_hat;
}

double ar_coefficient_error(const std::vector<CvtkRecord>& records,
                            const GaussianArProcess& proc) {
  if (static_cast<int>(records.at(0).token_dim) != proc.dim)
    throw DimensionError("oracle: records do not match the process dimension");
  std::vector<double> a_hat = ar_fit_lag1(records);
  double num = 0.0, den = 0.0;
  for (size_t i = 0; i < a_hat.size(); ++i) {
    double d = a_hat[i] - proc.A[i];
    num += d * d;
    den += proc.A[i] * proc.A[i];
  }
  if (den == 0.0) throw NumericError("oracle: process transition is zero");
  return std::sqrt(num / den);
}

double stationary_moment_error(const std::vector<CvtkRecord>& records,
                               const GaussianArProcess& proc) {
  check_token_dims(records, "oracle");
  int dim = proc.dim;
  if (static_cast<int>(records[0].token_dim) != dim)
    throw DimensionError("oracle: records do not match the process dimension");

  // Exact per-position moments: mean_t = mu_k - A^{t+1} mu_k and
  // C_t = A C_{t-1} A^T + sigma^2 I from C_0 = sigma^2 I. Records start at
  // b_k + sigma eps, so the transient is part of the truth.
  int max_len = 0;
  for (const auto& rec : records)
    max_len = std::max(max_len, static_cast<int>(rec.token_count));
  std::vector<std::vector<double>> c_t(max_len);
  c_t[0].assign(static_cast<size_t>(dim) * dim, 0.0);
  for (int i = 0; i < dim; ++i)
    c_t[0][static_cast<size_t>(i) * dim + i] = proc.sigma * proc.sigma;
  std::vector<double> a(proc.A), tmp;
  for (int t = 1; t < max_len; ++t) {
    matmul_dd(a, c_t[t - 1], tmp, dim);
    std::vector<double> at(static_cast<size_t>(dim) * dim);
    cblas_dgemm(CblasRowMajor, CblasNoTrans, CblasTrans, dim, dim, dim, 1.0,
                tmp.data(), dim, a.data(), dim, 0.0, at.data(), dim);
    for (int i = 0; i < dim; ++i)
      at[static_cast<size_t>(i) * dim + i] += proc.sigma * proc.sigma;
    c_t[t] = std::move(at);
  }
  std::vector<std::vector<std::vector<double>>> m_t(proc.classes);
  for (int k = 0; k < proc.classes; ++k) {
    std::vector<double> mu = gaussian_ar_stationary_mean(proc, k);
    m_t[k].resize(max_len);
    std::vector<double> v(dim);  // A^{t+1} mu
    for (int i = 0; i < dim; ++i) {
      v[i] = 0.0;
      for (int j = 0; j < dim; ++j)
        v[i] += proc.A[static_cast<size_t>(i) * dim + j] * mu[j];
    }
    for (int t = 0; t < max_len; ++t) {
      m_t[k][t].resize(dim);
      for (int i = 0; i < dim; ++i) m_t[k][t][i] = mu[i] - v[i];
      std::vector<double> nv(dim, 0.0);
      for (int i = 0; i < dim; ++i)
        for (int j = 0; j < dim; ++j)
          nv[i] += proc.A[static_cast<size_t>(i) * dim + j] * v[j];
      v = std::move(nv);
    }
  }

  // Expected pooled moments across every (record, position) token.
  int64_t total = 0;
  std::vector<double> em(dim, 0.0);
  std::vector<double> emom(static_cast<size_t>(dim) * dim, 0.0);
  for (const auto& rec : records) {
    int k = classify_record(rec, proc);
    int n = static_cast<int>(rec.token_count);
    for (int t = 0; t < n; ++t) {
      const std::vector<double>& m = m_t[k][t];
      for (int i = 0; i < dim; ++i) {
        em[i] += m[i];
        for (int j = 0; j < dim; ++j)
          emom[static_cast<size_t>(i) * dim + j] +=
              c_t[t][static_cast<size_t>(i) * dim + j] + m[i] * m[j];
      }
    }
    total += n;
  }
  for (double& x : em) x /= static_cast<double>(total);
  for (double& x : emom) x /= static_cast<double>(total);
  std::vector<double> ecov(emom);
  for (int i = 0; i < dim; ++i)
    for (int j = 0; j < dim; ++j)
      ecov[static_cast<size_t>(i) * dim + j] -= em[i] * em[j];

  GaussianStats fit = fit_token_gaussian(records);
  double scale = static_cast<double>(fit.count - 1) / fit.count;
  double num = 0.0, den = 0.0;
  for (int i = 0; i < dim; ++i) {
    double d = fit.mean[i] - em[i];
    num += d * d;
    den += em[i] * em[i];
  }
  for (size_t i = 0; i < ecov.size(); ++i) {
    double d = fit.cov[i] * scale - ecov[i];
    num += d * d;
    den += ecov[i] * ecov[i];
  }
  if (den == 0.0) throw NumericError("oracle: degenerate expected moments");
  return std::sqrt(num / den);
}

void EvalReport::validate() const {
  auto chk = [](const char* name, const std::optional<double>& v) {
    if (v && !std::isfinite(*v))
      throw NumericError(std::string("eval report: ") + name +
                         " is not finite");
  };
  chk("latent_fd", latent_fd);
  chk("heldout_diff_loss", heldout_diff_loss);
  chk("ar_coeff_error", ar_coeff_error);
  chk("moment_error", moment_error);
  chk("rtf", rtf);
  if (!latent_fd && !heldout_diff_loss && !ar_coeff_error && !moment_error &&
      !rtf)
    throw ArgumentError("eval report: no metrics computed");
}

nlohmann::ordered_json EvalReport::to_json() const {
  validate();
  nlohmann::ordered_json j;
  if (latent_fd) j["latent_fd"] = *latent_fd;
  if (heldout_diff_loss) j["heldout_diff_loss"] = *heldout_diff_loss;
  if (ar_coeff_error) j["ar_coeff_error"] = *ar_coeff_error;
  if (moment_error) j["moment_error"] = *moment_error;
  if (rtf) j["rtf"] = *rtf;
  j["config"] = config.is_null() ? nlohmann::ordered_json::object() : config;
  j["seeds"] = seeds;
  return j;
}

}  // namespace mntp
