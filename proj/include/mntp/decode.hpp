#pragma once

// Decoding: causal one-token-per-step generation over the KV-cached path,
// and random-order in-place refinement with a cosine retention schedule.
// Guidance runs a second all-fake lane per sequence and anneals its weight
// from omega0 down to 1 across positions.

#include <cstdint>
#include <vector>

#include "mntp/diffusion.hpp"
#include "mntp/model.hpp"

namespace mntp {

// Anneal weight for the i-th generated token of n, i in [1, n]; omega0 at
// the first token, 1 at the last, and omega0 itself when n == 1.
double cfg_scale(int i, int n, double omega0);

struct DecodePolicy {
  int steps = 100;              // reverse-process steps per token
  double tau = 1.0;             // sampling temperature on posterior noise
  double omega0 = 7.0;          // guidance anneal start
  bool cfg = false;             // classifier-free guidance on/off
  bool lower_variance = false;  // posterior sigma instead of sqrt(1-alpha')

  void validate() const;
};

// Tokens revealed per round of a `rounds`-round random-order decode. Counts
// follow the cosine profile (few early, many late), are each at least 1,
// and sum to exactly n. Requires 1 <= rounds <= n.
std::vector<int> retention_counts(int n, int rounds);

// Generates n tokens for each sequence, all sequences in lockstep. An empty
// condition selects the learned fake latent (unconditional decode); with
// guidance on, every sequence carries an extra fake lane. Noise draws come
// from streams keyed by (seed, sequence id, position), so the randomness a
// sequence sees does not depend on how sequences are grouped into calls.
std::vector<std::vector<float>> decode_causal(
    const ModelState<float>& model, const NoiseSchedule& sched,
    const DecodePolicy& policy, const std::vector<std::vector<float>>& conds,
    int n, uint64_t seed, const std::vector<uint64_t>& sequence_ids);

// Random-order decode: every round re-encodes the whole sequence with
// un-generated slots held at zero, then fills the next batch of positions
// from the per-sequence order (shuffled, or 0..n-1 when left_to_right).
// The guidance anneal follows the cumulative number of generated tokens.
std::vector<std::vector<float>> decode_random_order(
    const ModelState<float>& model, const NoiseSchedule& sched,
    const DecodePolicy& policy, const std::vector<std::vector<float>>& conds,
    int n, int rounds, bool left_to_right, uint64_t seed,
    const std::vector<uint64_t>& sequence_ids);

}  // namespace mntp
