#pragma once

// Decoder transformer over continuous-valued tokens. A sequence is laid out
// as [condition prefix | start slot | token slots]; every token slot carries
// a content positional embedding for where its token sits and, when enabled,
// a target positional embedding for where its prediction lands. Dropped-out
// conditions are replaced by a learned fake latent before projection.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "mntp/diffusion.hpp"
#include "mntp/errors.hpp"
#include "mntp/params.hpp"
#include "mntp/rng.hpp"
#include "mntp/tensor.hpp"

namespace mntp {

enum class AttentionMode { causal, bidirectional };

struct ModelConfig {
  int layers = 4;
  int hidden = 128;
  int heads = 4;
  int mlp_ratio = 4;
  int max_seq = 64;   // largest token count; also the "no target" sentinel row
  int token_dim = 0;
  int cond_len = 0;   // condition prefix slots (0 = unconditional)
  int cond_dim = 0;
  bool target_pos_emb = true;

  // mini / small / base / large set layers, hidden and heads.
  static ModelConfig preset(const std::string& name);
  void validate() const;
};

// One assembled sequence, ready for encoding. For drop-style masking the
// token list holds only the kept tokens; for in-place strategies it holds
// all n (possibly corrupted) tokens. target_idx has one entry for the start
// slot followed by one per token slot; the value n means "no target".
struct SeqInput {
  int n = 0;
  std::vector<float> cond;       // cond_len * cond_dim, ignored if fake_cond
  bool fake_cond = false;
  std::vector<float> tokens;     // m * token_dim
  std::vector<int> content_idx;  // m
  std::vector<int> target_idx;   // m + 1
};

template <class S>
struct ModelState {
  ModelConfig cfg;
  ParamStore<S> decoder;
  DiffusionHead<S> head;

  template <class T>
  ModelState<T> cast() const {
    return ModelState<T>{cfg, decoder.template cast<T>(), head.template cast<T>()};
  }

  // Unified registry; head parameters are exposed under the "head." prefix.
  std::vector<std::pair<std::string, Tensor<S>>> named_params() const {
    std::vector<std::pair<std::string, Tensor<S>>> all = decoder.items;
    for (auto& [n, t] : head.params.items) all.emplace_back("head." + n, t);
    return all;
  }
  int64_t param_count() const {
    return decoder.count() + head.params.count();
  }
};

template <class S>
ModelState<S> make_model(const ModelConfig& cfg, const HeadConfig& head_cfg,
                         uint64_t seed) {
  cfg.validate();
  if (head_cfg.token_dim != cfg.token_dim || head_cfg.z_dim != cfg.hidden)
    throw ArgumentError("model: head must consume token_dim tokens and "
                        "hidden-width conditioning");
  ModelState<S> st;
  st.cfg = cfg;
  Rng rng(seed, "init-decoder");
  auto& d = st.decoder;
  int H = cfg.hidden;
  d.add("emb.token.w", init_normal<S>({cfg.token_dim, H}, 0.02, rng));
  d.add("emb.token.b", init_zeros<S>({H}));
  if (cfg.cond_len > 0) {
    d.add("emb.cond.w", init_normal<S>({cfg.cond_dim, H}, 0.02, rng));
    d.add("emb.cond.b", init_zeros<S>({H}));
    d.add("emb.cond.pos", init_normal<S>({cfg.cond_len, H}, 0.02, rng));
    // Learned stand-in condition used when dropout hides the real one.
    d.add("emb.fake", init_normal<S>({cfg.cond_len, cfg.cond_dim}, 0.02, rng));
  }
  d.add("emb.bos", init_normal<S>({H}, 0.02, rng));
  d.add("emb.pos.content", init_normal<S>({cfg.max_seq, H}, 0.02, rng));
  if (cfg.target_pos_emb)  // one extra row: the shared "no target" sentinel
    d.add("emb.pos.target", init_normal<S>({cfg.max_seq + 1, H}, 0.02, rng));
  for (int l = 0; l < cfg.layers; ++l) {
    std::string p = "l" + std::to_string(l) + ".";
    d.add(p + "ln1.g", init_ones<S>({H}));
    d.add(p + "ln1.b", init_zeros<S>({H}));
    for (const char* w : {"wq", "wk", "wv", "wo"})
      d.add(p + "attn." + w, init_normal<S>({H, H}, 0.02, rng));
    for (const char* b : {"bq", "bk", "bv", "bo"})
      d.add(p + "attn." + b, init_zeros<S>({H}));
    d.add(p + "ln2.g", init_ones<S>({H}));
    d.add(p + "ln2.b", init_zeros<S>({H}));
    d.add(p + "mlp.w1", init_normal<S>({H, cfg.mlp_ratio * H}, 0.02, rng));
    d.add(p + "mlp.b1", init_zeros<S>({cfg.mlp_ratio * H}));
    d.add(p + "mlp.w2", init_normal<S>({cfg.mlp_ratio * H, H}, 0.02, rng));
    d.add(p + "mlp.b2", init_zeros<S>({H}));
  }
  if (cfg.layers > 0) {
    d.add("final.ln.g", init_ones<S>({H}));
    d.add("final.ln.b", init_zeros<S>({H}));
  }
  Rng hrng(seed, "init-head");
  st.head = make_head<S>(head_cfg, hrng);
  return st;
}

// Condition fitting: longer inputs are truncated to the prefix length,
// shorter ones are an error.
std::vector<float> fit_condition(const std::vector<float>& cond, int cond_len,
                                 int cond_dim);

template <class S>
struct EncodeOut {
  Tensor<S> z;        // (batch * slots_per_seq, hidden), final representation
  int batch = 0;
  int prefix = 0;     // condition slots per sequence
  int token_slots = 0;  // padded token slots per sequence
  int slots_per_seq() const { return prefix + 1 + token_slots; }
  // Row of the start slot / token slot j of sequence b.
  int start_row(int b) const { return b * slots_per_seq() + prefix; }
  int token_row(int b, int j) const { return start_row(b) + 1 + j; }
};

namespace detail_model {

template <class S>
Tensor<S> affine_ln(const Tensor<S>& x, const Tensor<S>& g, const Tensor<S>& b) {
  return add(mul(layernorm_lastdim(x), g), b);
}

template <class S>
Tensor<S> attention_mask(int slots, AttentionMode mode) {
  std::vector<S> m(static_cast<size_t>(slots) * slots, S(0));
  if (mode == AttentionMode::causal)
    for (int r = 0; r < slots; ++r)
      for (int c = r + 1; c < slots; ++c)
        m[static_cast<size_t>(r) * slots + c] = S(-1e30);
  return Tensor<S>::from({slots, slots}, std::move(m));
}

}  // namespace detail_model

// Batched graph encoding. All sequences must share n and (for bidirectional
// attention) the same slot count; causal batches may have ragged token
// counts, padded on the right. Pad slots produce garbage rows that the
// caller must never read, and causal masking keeps them from influencing
// real slots.
template <class S>
EncodeOut<S> encode_batch(const ModelState<S>& state,
                          const std::vector<SeqInput>& seqs,
                          AttentionMode mode) {
  const ModelConfig& cfg = state.cfg;
  if (seqs.empty()) throw ArgumentError("encode: empty batch");
  int B = static_cast<int>(seqs.size());
  int P = cfg.cond_len;
  int H = cfg.hidden;
  int td = cfg.token_dim;
  int S_tok = 0;
  for (const auto& q : seqs) {
    if (q.n < 1 || q.n > cfg.max_seq)
      throw RangeError("encode: sequence length " + std::to_string(q.n) +
                       " outside [1, " + std::to_string(cfg.max_seq) + "]");
    int m = static_cast<int>(q.content_idx.size());
    if (static_cast<int>(q.tokens.size()) != m * td)
      throw DimensionError("encode: token buffer does not match index count");
    if (static_cast<int>(q.target_idx.size()) != m + 1)
      throw DimensionError("encode: target_idx must hold start slot + tokens");
    if (!q.fake_cond && P > 0 &&
        static_cast<int>(q.cond.size()) != P * cfg.cond_dim)
      throw DimensionError("encode: condition must be cond_len * cond_dim "
                           "(use fit_condition)");
    for (int c : q.content_idx)
      if (c < 0 || c >= q.n)
        throw RangeError("encode: content index " + std::to_string(c) +
                         " outside [0, n)");
    for (int t : q.target_idx)
      if (t < 0 || t > q.n)
        throw RangeError("encode: target index " + std::to_string(t) +
                         " outside [0, n]");
    S_tok = std::max(S_tok, m);
  }
  if (mode == AttentionMode::bidirectional)
    for (const auto& q : seqs)
      if (static_cast<int>(q.content_idx.size()) != S_tok)
        throw ArgumentError("encode: bidirectional batches must not be ragged");

  int S_all = P + 1 + S_tok;
  const auto& d = state.decoder;

  // Token projection, batched over every (padded) slot.
  std::vector<S> tok_raw(static_cast<size_t>(B) * S_tok * td, S(0));
  for (int b = 0; b < B; ++b) {
    const auto& q = seqs[b];
    std::copy(q.tokens.begin(), q.tokens.end(),
              tok_raw.begin() + static_cast<size_t>(b) * S_tok * td);
  }
  Tensor<S> tok_proj;
  if (S_tok > 0)
    tok_proj = add(matmul(Tensor<S>::from({B * S_tok, td}, std::move(tok_raw)),
                          d.get("emb.token.w")),
                   d.get("emb.token.b"));

  // Condition projection: real rows batched, fake rows shared.
  Tensor<S> cond_proj, fake_proj;
  if (P > 0) {
    std::vector<S> cond_raw(static_cast<size_t>(B) * P * cfg.cond_dim, S(0));
    for (int b = 0; b < B; ++b)
      if (!seqs[b].fake_cond)
        std::copy(seqs[b].cond.begin(), seqs[b].cond.end(),
                  cond_raw.begin() + static_cast<size_t>(b) * P * cfg.cond_dim);
    cond_proj = add(matmul(Tensor<S>::from({B * P, cfg.cond_dim},
                                           std::move(cond_raw)),
                           d.get("emb.cond.w")),
                    d.get("emb.cond.b"));
    fake_proj = add(matmul(d.get("emb.fake"), d.get("emb.cond.w")),
                    d.get("emb.cond.b"));
  }

  Tensor<S> bos_rows = repeat_row(d.get("emb.bos"), B);

  // Interleave [cond | start | tokens] per sequence.
  std::vector<Tensor<S>> rows;
  for (int b = 0; b < B; ++b) {
    if (P > 0)
      rows.push_back(seqs[b].fake_cond ? fake_proj
                                       : slice_rows(cond_proj, b * P, P));
    rows.push_back(slice_rows(bos_rows, b, 1));
    if (S_tok > 0) rows.push_back(slice_rows(tok_proj, b * S_tok, S_tok));
  }
  Tensor<S> x = concat_rows(rows);

  // Positional adds; index -1 contributes a zero row.
  std::vector<int> idx_content(static_cast<size_t>(B) * S_all, -1);
  std::vector<int> idx_target(static_cast<size_t>(B) * S_all, -1);
  std::vector<int> idx_condpos(static_cast<size_t>(B) * S_all, -1);
  for (int b = 0; b < B; ++b) {
    const auto& q = seqs[b];
    int base = b * S_all;
    for (int p = 0; p < P; ++p) idx_condpos[base + p] = p;
    auto target_row = [&](int t) { return t >= q.n ? cfg.max_seq : t; };
    idx_target[base + P] = target_row(q.target_idx[0]);
    for (size_t j = 0; j < q.content_idx.size(); ++j) {
      idx_content[base + P + 1 + static_cast<int>(j)] = q.content_idx[j];
      idx_target[base + P + 1 + static_cast<int>(j)] =
          target_row(q.target_idx[j + 1]);
    }
  }
  x = add(x, gather_rows(d.get("emb.pos.content"), idx_content));
  if (cfg.target_pos_emb)
    x = add(x, gather_rows(d.get("emb.pos.target"), idx_target));
  if (P > 0) x = add(x, gather_rows(d.get("emb.cond.pos"), idx_condpos));

  // Transformer stack.
  Tensor<S> mask = detail_model::attention_mask<S>(S_all, mode);
  int dh = H / cfg.heads;
  S inv_sqrt_dh = S(1) / static_cast<S>(std::sqrt(static_cast<double>(dh)));
  for (int l = 0; l < cfg.layers; ++l) {
    std::string p = "l" + std::to_string(l) + ".";
    Tensor<S> h1 = detail_model::affine_ln(x, d.get(p + "ln1.g"),
                                           d.get(p + "ln1.b"));
    Tensor<S> q = add(matmul(h1, d.get(p + "attn.wq")), d.get(p + "attn.bq"));
    Tensor<S> k = add(matmul(h1, d.get(p + "attn.wk")), d.get(p + "attn.bk"));
    Tensor<S> v = add(matmul(h1, d.get(p + "attn.wv")), d.get(p + "attn.bv"));
    std::vector<Tensor<S>> seq_ctx;
    for (int b = 0; b < B; ++b) {
      std::vector<Tensor<S>> head_ctx;
      Tensor<S> qb = slice_rows(q, b * S_all, S_all);
      Tensor<S> kb = slice_rows(k, b * S_all, S_all);
      Tensor<S> vb = slice_rows(v, b * S_all, S_all);
      for (int hd = 0; hd < cfg.heads; ++hd) {
        Tensor<S> qh = slice_cols(qb, hd * dh, dh);
        Tensor<S> kh = slice_cols(kb, hd * dh, dh);
        Tensor<S> vh = slice_cols(vb, hd * dh, dh);
        Tensor<S> scores = add(scale(matmul_nt(qh, kh), inv_sqrt_dh), mask);
        head_ctx.push_back(matmul(softmax_lastdim(scores), vh));
      }
      seq_ctx.push_back(concat_cols(head_ctx));
    }
    Tensor<S> ctx = concat_rows(seq_ctx);
    x = add(x, add(matmul(ctx, d.get(p + "attn.wo")), d.get(p + "attn.bo")));
    Tensor<S> h2 = detail_model::affine_ln(x, d.get(p + "ln2.g"),
                                           d.get(p + "ln2.b"));
    Tensor<S> mlp = add(matmul(gelu(add(matmul(h2, d.get(p + "mlp.w1")),
                                        d.get(p + "mlp.b1"))),
                               d.get(p + "mlp.w2")),
                        d.get(p + "mlp.b2"));
    x = add(x, mlp);
  }

  EncodeOut<S> out;
  // Zero layers: the representation is the embedded input itself.
  out.z = cfg.layers > 0 ? detail_model::affine_ln(x, d.get("final.ln.g"),
                                                   d.get("final.ln.b"))
                         : x;
  out.batch = B;
  out.prefix = P;
  out.token_slots = S_tok;
  return out;
}

// Single-sequence convenience: rows [start slot, token slots...].
template <class S>
Tensor<S> encode_context(const ModelState<S>& state, const SeqInput& seq,
                         AttentionMode mode) {
  EncodeOut<S> out = encode_batch(state, {seq}, mode);
  return slice_rows(out.z, out.prefix, 1 + out.token_slots);
}

// ---------------------------------------------------------------------------
// Incremental causal inference over float weights with per-layer KV caches.
// Runs `lanes` independent sequences in lockstep (one GEMM per projection).
// Agrees with the graph path to within float tolerance.

class CausalBatch {
 public:
  // cond: lanes * cond_len * cond_dim (ignored when cond_len == 0);
  // fake[b] selects the learned fake latent for that lane.
  CausalBatch(const ModelState<float>& state, int lanes,
              const std::vector<float>& cond, const std::vector<uint8_t>& fake,
              int n);

  // Feeds the condition prefix and the start slot; fills z with each lane's
  // start-slot representation (lanes * hidden). first_target is the position
  // the start slot predicts (normally 0).
  void prefill(int first_target, std::vector<float>& z);

  // Appends one token per lane and returns the new representations.
  // content/target are shared across lanes (decode proceeds in lockstep).
  void append(const std::vector<float>& tokens, int content_idx,
              int target_idx, std::vector<float>& z);

  int slots() const { return slots_; }

 private:
  void embed_condition_slot(int p);
  void push_slot(std::vector<float>& x, std::vector<float>& z_out);

  const ModelState<float>& state_;
  int lanes_ = 0;
  int n_ = 0;
  int slots_ = 0;  // slots consumed so far (per lane)
  std::vector<float> cond_;
  std::vector<uint8_t> fake_;
  // Per layer: keys/values, laid out [lane][slot][hidden].
  std::vector<std::vector<float>> kcache_, vcache_;
  int capacity_ = 0;
  std::vector<float> buf_x_, buf_h_, buf_q_, buf_k_, buf_v_, buf_ctx_,
      buf_mlp_, buf_mlp2_;
};

}  // namespace mntp
