#pragma once

// Desk-scale metric surrogates: Frechet distance between Gaussian fits of
// token sets, teacher-forced held-out diffusion loss, deltas against the
// synthetic process that generated a dataset, and real-time-factor timing.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "mntp/codec.hpp"
#include "mntp/cvtk.hpp"
#include "mntp/decode.hpp"
#include "mntp/trainer.hpp"

namespace mntp {

// Eigendecomposition of the symmetric n x n row-major matrix `a` by cyclic
// Jacobi rotations. vals come out ascending; column j of vecs (row-major)
// is the eigenvector for vals[j].
void jacobi_eigensymm(const std::vector<double>& a, int n,
                      std::vector<double>& vecs, std::vector<double>& vals);

struct GaussianStats {
  int dim = 0;
  int64_t count = 0;
  std::vector<double> mean;  // dim
  std::vector<double> cov;   // dim x dim, unbiased (count - 1) normalizer
};

// Fits mean and covariance over `count` rows of `dim` values each.
GaussianStats fit_gaussian(const std::vector<double>& rows, int count,
                           int dim);

// Pools every token of every record into one row set and fits it.
GaussianStats fit_token_gaussian(const std::vector<CvtkRecord>& records);

// |mu_a - mu_b|^2 + Tr(S_a + S_b - 2 (S_a S_b)^{1/2}), with the matrix
// square root taken through the symmetric form S_a^{1/2} S_b S_a^{1/2} and
// negative eigenvalues clamped at zero. Needs matching dimensions and at
// least dim + 1 samples behind each fit.
double frechet_distance(const GaussianStats& a, const GaussianStats& b);

// Teacher-forced diffusion loss on held-out records: every position is
// predicted from its full clean context (nothing masked), with `reps`
// independent (t, eps) draws per position, pooled exactly like the training
// loss. Draw streams are keyed by a content hash of each record, so the
// value is invariant to record order. Only causal next/skip models can be
// teacher-forced this way; bidirectional in-place models are rejected.
double heldout_diffusion_loss(const ModelState<float>& state,
                              const TrainConfig& train,
                              const NoiseSchedule& sched,
                              const std::vector<CvtkRecord>& records,
                              uint64_t seed, int reps);

// Median over `runs` timed unconditional decodes of n tokens at batch size
// one, divided by the clip duration the tokens stand for. One untimed
// warm-up decode runs first.
double measure_rtf(const ModelState<float>& state, const NoiseSchedule& sched,
                   const DecodePolicy& policy, int n, double clip_seconds,
                   int runs = 5);

// Pooled lag-1 least squares fit over all records. Records sharing a
// condition share an intercept (centering by condition group), so per-class
// offsets drop out without biasing the slope. Returns the dim x dim
// row-major transition estimate.
std::vector<double> ar_fit_lag1(const std::vector<CvtkRecord>& records);

// Relative Frobenius error of the lag-1 fit against the true transition.
double ar_coefficient_error(const std::vector<CvtkRecord>& records,
                            const GaussianArProcess& proc);

// Relative error of pooled token mean and covariance against the exact
// finite-length moments of the process (start transient included), as one
// scalar: sqrt(|dm|^2 + |dC|_F^2) / sqrt(|m|^2 + |C|_F^2). Record classes
// are inferred from their conditions. Converges to zero in record count.
double stationary_moment_error(const std::vector<CvtkRecord>& records,
                               const GaussianArProcess& proc);

// One evaluation run. Metrics that were not computed stay disengaged and
// are omitted from the JSON; everything that is present must be finite.
struct EvalReport {
  std::optional<double> latent_fd;
  std::optional<double> heldout_diff_loss;
  std::optional<double> ar_coeff_error;
  std::optional<double> moment_error;
  std::optional<double> rtf;
  nlohmann::ordered_json config;  // echo of the evaluated configuration
  std::vector<uint64_t> seeds;

  void validate() const;
  nlohmann::ordered_json to_json() const;
};

}  // namespace mntp
