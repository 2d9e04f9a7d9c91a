#include "mntp/decode.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace mntp {

double cfg_scale(int i, int n, double omega0) {
  if (n < 1) throw ArgumentError("cfg_scale: n must be positive");
  if (i < 1 || i > n) throw RangeError("cfg_scale: i outside [1, n]");
  if (n == 1) return omega0;
  double frac = static_cast<double>(i - 1) / static_cast<double>(n - 1);
  return 1.0 + (omega0 - 1.0) * (1.0 - frac);
}

void DecodePolicy::validate() const {
  if (steps < 1) throw ArgumentError("decode: steps must be positive");
  if (tau < 0) throw ArgumentError("decode: tau must be non-negative");
  if (omega0 <= 0) throw ArgumentError("decode: omega0 must be positive");
}

std::vector<int> retention_counts(int n, int rounds) {
  if (n < 1) throw ArgumentError("retention: n must be positive");
  if (rounds < 1 || rounds > n)
    throw ArgumentError("retention: rounds must lie in [1, n]");
  // Remaining-token curve round(n cos(pi/2 k/R)), clamped so every round
  // reveals at least one token and the curve reaches zero exactly at R.
  std::vector<int> counts(rounds);
  int prev = n;
  for (int k = 1; k <= rounds; ++k) {
    double angle = M_PI_2 * static_cast<double>(k) / rounds;
    int remaining = static_cast<int>(std::llround(n * std::cos(angle)));
    remaining = std::min(remaining, prev - 1);
    remaining = std::max(remaining, rounds - k);
    if (k == rounds) remaining = 0;
    counts[k - 1] = prev - remaining;
    prev = remaining;
  }
  return counts;
}

namespace {

struct LaneSetup {
  int B = 0;
  int lanes = 0;
  std::vector<float> cond;
  std::vector<uint8_t> fake;
};

LaneSetup build_lanes(const ModelState<float>& model,
                      const DecodePolicy& policy,
                      const std::vector<std::vector<float>>& conds,
                      const std::vector<uint64_t>& ids) {
  const ModelConfig& cfg = model.cfg;
  LaneSetup ls;
  ls.B = static_cast<int>(conds.size());
  if (ls.B < 1) throw ArgumentError("decode: no sequences");
  if (ids.size() != conds.size())
    throw ArgumentError("decode: one sequence id per condition is required");
  if (policy.cfg && cfg.cond_len == 0)
    throw CapabilityError("decode: guidance needs a conditional model");
  ls.lanes = policy.cfg ? 2 * ls.B : ls.B;
  size_t per = static_cast<size_t>(cfg.cond_len) * cfg.cond_dim;
  ls.cond.assign(static_cast<size_t>(ls.lanes) * per, 0.0f);
  ls.fake.assign(ls.lanes, 1);
  for (int b = 0; b < ls.B; ++b) {
    if (conds[b].empty()) continue;  // unconditional lane
    if (cfg.cond_len == 0)
      throw DimensionError("decode: model takes no condition");
    if (conds[b].size() != per)
      throw DimensionError("decode: condition must be cond_len * cond_dim "
                           "(use fit_condition)");
    ls.fake[b] = 0;
    std::copy(conds[b].begin(), conds[b].end(),
              ls.cond.begin() + static_cast<size_t>(b) * per);
  }
  return ls;
}

// Draws for position `pos` of a sequence come from a stream keyed by the
// sequence id and the position, so output is invariant to batch grouping
// and, for random order, to the revelation schedule.
std::vector<Rng> position_streams(uint64_t seed,
                                  const std::vector<uint64_t>& ids,
                                  const std::vector<int>& positions) {
  std::vector<Rng> rngs;
  rngs.reserve(positions.size());
  for (size_t i = 0; i < positions.size(); ++i)
    rngs.emplace_back(seed, "decode", ids[i],
                      static_cast<uint64_t>(positions[i]));
  return rngs;
}

}  // namespace

std::vector<std::vector<float>> decode_causal(
    const ModelState<float>& model, const NoiseSchedule& sched,
    const DecodePolicy& policy, const std::vector<std::vector<float>>& conds,
    int n, uint64_t seed, const std::vector<uint64_t>& sequence_ids) {
  policy.validate();
  LaneSetup ls = build_lanes(model, policy, conds, sequence_ids);
  SubSchedule sub = make_subschedule(sched, policy.steps,
                                     policy.lower_variance);
  int B = ls.B, H = model.cfg.hidden, td = model.cfg.token_dim;

  CausalBatch kv(model, ls.lanes, ls.cond, ls.fake, n);
  std::vector<float> z;
  kv.prefill(0, z);

  std::vector<std::vector<float>> out(
      B, std::vector<float>(static_cast<size_t>(n) * td));
  std::vector<float> z_c(static_cast<size_t>(B) * H);
  std::vector<float> z_u(policy.cfg ? z_c.size() : 0);
  std::vector<double> omega(B);
  std::vector<float> tokens(static_cast<size_t>(B) * td);
  std::vector<float> append_buf(static_cast<size_t>(ls.lanes) * td);

  for (int i = 0; i < n; ++i) {
    std::copy_n(z.data(), z_c.size(), z_c.data());
    if (policy.cfg) std::copy_n(z.data() + z_c.size(), z_u.size(), z_u.data());
    std::fill(omega.begin(), omega.end(), cfg_scale(i + 1, n, policy.omega0));
    std::vector<Rng> rngs =
        position_streams(seed, sequence_ids, std::vector<int>(B, i));
    sample_tokens(model.head, sub, B, z_c, policy.cfg ? &z_u : nullptr, omega,
                  policy.tau, rngs, tokens);
    for (int b = 0; b < B; ++b)
      std::copy_n(tokens.data() + static_cast<size_t>(b) * td, td,
                  out[b].data() + static_cast<size_t>(i) * td);
    if (i + 1 < n) {
      // Both lanes of a sequence consume the same sampled token, so the
      // guided and unguided contexts stay on one shared trajectory.
      std::copy(tokens.begin(), tokens.end(), append_buf.begin());
      if (policy.cfg)
        std::copy(tokens.begin(), tokens.end(),
                  append_buf.begin() + tokens.size());
      kv.append(append_buf, i, i + 1, z);
    }
  }
  return out;
}

std::vector<std::vector<float>> decode_random_order(
    const ModelState<float>& model, const NoiseSchedule& sched,
    const DecodePolicy& policy, const std::vector<std::vector<float>>& conds,
    int n, int rounds, bool left_to_right, uint64_t seed,
    const std::vector<uint64_t>& sequence_ids) {
  policy.validate();
  if (n < 1 || n > model.cfg.max_seq)
    throw RangeError("decode: sequence length outside [1, max_seq]");
  LaneSetup ls = build_lanes(model, policy, conds, sequence_ids);
  SubSchedule sub = make_subschedule(sched, policy.steps,
                                     policy.lower_variance);
  std::vector<int> counts = retention_counts(n, rounds);
  int B = ls.B, H = model.cfg.hidden, td = model.cfg.token_dim;
  int P = model.cfg.cond_len;

  // Per-sequence generation order.
  std::vector<std::vector<int>> order(B);
  for (int b = 0; b < B; ++b) {
    order[b].resize(n);
    std::iota(order[b].begin(), order[b].end(), 0);
    if (!left_to_right) {
      Rng orng(seed, "order", sequence_ids[b]);
      for (int j = n - 1; j > 0; --j)
        std::swap(order[b][static_cast<size_t>(j)],
                  order[b][static_cast<size_t>(orng.below(
                      static_cast<uint64_t>(j) + 1))]);
    }
  }

  // Lane layout mirrors build_lanes: real sequences first, then (with
  // guidance) one fake twin per sequence sharing the token values.
  std::vector<SeqInput> seqs(ls.lanes);
  size_t per = static_cast<size_t>(P) * model.cfg.cond_dim;
  for (int l = 0; l < ls.lanes; ++l) {
    SeqInput& q = seqs[l];
    q.n = n;
    q.fake_cond = ls.fake[l] != 0;
    if (!q.fake_cond)
      q.cond.assign(ls.cond.begin() + static_cast<size_t>(l) * per,
                    ls.cond.begin() + static_cast<size_t>(l + 1) * per);
    q.content_idx.resize(n);
    std::iota(q.content_idx.begin(), q.content_idx.end(), 0);
    q.target_idx.assign(static_cast<size_t>(n) + 1, 0);
    q.target_idx[0] = n;  // start slot predicts nothing in place
    for (int j = 0; j < n; ++j) q.target_idx[j + 1] = j;
    q.tokens.assign(static_cast<size_t>(n) * td, 0.0f);
  }

  std::vector<std::vector<float>> out(
      B, std::vector<float>(static_cast<size_t>(n) * td, 0.0f));
  int generated = 0;
  for (int r = 0; r < rounds; ++r) {
    int reveal = counts[r];
    int m = B * reveal;
    std::vector<float> z_c(static_cast<size_t>(m) * H);
    std::vector<float> z_u(policy.cfg ? z_c.size() : 0);
    {
      NoGradGuard guard;
      EncodeOut<float> enc =
          encode_batch(model, seqs, AttentionMode::bidirectional);
      for (int b = 0; b < B; ++b)
        for (int j = 0; j < reveal; ++j) {
          int pos = order[b][generated + j];
          size_t dst = (static_cast<size_t>(b) * reveal + j) * H;
          std::copy_n(enc.z.vals().data() +
                          static_cast<size_t>(enc.token_row(b, pos)) * H,
                      H, z_c.data() + dst);
          if (policy.cfg)
            std::copy_n(enc.z.vals().data() +
                            static_cast<size_t>(enc.token_row(B + b, pos)) *
                                H,
                        H, z_u.data() + dst);
        }
    }
    // The anneal weight follows the cumulative number of generated tokens.
    std::vector<double> omega(m);
    std::vector<uint64_t> slot_ids(m);
    std::vector<int> slot_pos(m);
    for (int b = 0; b < B; ++b)
      for (int j = 0; j < reveal; ++j) {
        size_t s = static_cast<size_t>(b) * reveal + j;
        omega[s] = cfg_scale(generated + j + 1, n, policy.omega0);
        slot_ids[s] = sequence_ids[b];
        slot_pos[s] = order[b][generated + j];
      }
    std::vector<Rng> rngs = position_streams(seed, slot_ids, slot_pos);
    std::vector<float> toks(static_cast<size_t>(m) * td);
    sample_tokens(model.head, sub, m, z_c, policy.cfg ? &z_u : nullptr, omega,
                  policy.tau, rngs, toks);
    for (int b = 0; b < B; ++b)
      for (int j = 0; j < reveal; ++j) {
        int pos = order[b][generated + j];
        const float* tok =
            toks.data() + (static_cast<size_t>(b) * reveal + j) * td;
        std::copy_n(tok, td, out[b].data() + static_cast<size_t>(pos) * td);
        std::copy_n(tok, td,
                    seqs[b].tokens.data() + static_cast<size_t>(pos) * td);
        if (policy.cfg)
          std::copy_n(tok, td, seqs[B + b].tokens.data() +
                                   static_cast<size_t>(pos) * td);
      }
    generated += reveal;
  }
  return out;
}

}  // namespace mntp
