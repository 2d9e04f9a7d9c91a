#include "mntp/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "mntp/kernels.hpp"

namespace mntp {

ModelConfig ModelConfig::preset(const std::string& name) {
  ModelConfig cfg;
  if (name == "mini") {
    cfg.layers = 4, cfg.hidden = 128, cfg.heads = 4;
  } else if (name == "small") {
    cfg.layers = 8, cfg.hidden = 256, cfg.heads = 8;
  } else if (name == "base") {
    cfg.layers = 24, cfg.hidden = 768, cfg.heads = 12;
  } else if (name == "large") {
    cfg.layers = 32, cfg.hidden = 1024, cfg.heads = 16;
  } else {
    throw ArgumentError("unknown model preset '" + name +
                        "' (expected mini, small, base or large)");
  }
  return cfg;
}

void ModelConfig::validate() const {
  if (layers < 0) throw ArgumentError("model: layers must be non-negative");
  if (hidden < 1 || heads < 1 || hidden % heads != 0)
    throw ArgumentError("model: hidden must be a positive multiple of heads");
  if (mlp_ratio < 1) throw ArgumentError("model: mlp_ratio must be positive");
  if (max_seq < 1) throw ArgumentError("model: max_seq must be positive");
  if (token_dim < 1) throw ArgumentError("model: token_dim must be positive");
  if (cond_len < 0 || (cond_len > 0 && cond_dim < 1))
    throw ArgumentError("model: conditional models need cond_len >= 1 and "
                        "cond_dim >= 1");
}

std::vector<float> fit_condition(const std::vector<float>& cond, int cond_len,
                                 int cond_dim) {
  size_t need = static_cast<size_t>(cond_len) * cond_dim;
  if (cond.size() < need)
    throw DimensionError("condition holds " + std::to_string(cond.size()) +
                         " values, need at least " + std::to_string(need));
  return std::vector<float>(cond.begin(), cond.begin() + need);
}

// ---------------------------------------------------------------------------
// KV-cached incremental path.

CausalBatch::CausalBatch(const ModelState<float>& state, int lanes,
                         const std::vector<float>& cond,
                         const std::vector<uint8_t>& fake, int n)
    : state_(state), lanes_(lanes), n_(n), cond_(cond), fake_(fake) {
  const ModelConfig& cfg = state_.cfg;
  cfg.validate();
  if (lanes_ < 1) throw ArgumentError("decode: lane count must be positive");
  if (n_ < 1 || n_ > cfg.max_seq)
    throw RangeError("decode: sequence length " + std::to_string(n_) +
                     " outside [1, " + std::to_string(cfg.max_seq) + "]");
  if (static_cast<int>(fake_.size()) != lanes_)
    throw DimensionError("decode: fake flags must cover every lane");
  if (cfg.cond_len > 0) {
    size_t need = static_cast<size_t>(lanes_) * cfg.cond_len * cfg.cond_dim;
    bool any_real =
        std::any_of(fake_.begin(), fake_.end(), [](uint8_t f) { return !f; });
    if (any_real && cond_.size() != need)
      throw DimensionError("decode: condition buffer must be lanes * "
                           "cond_len * cond_dim");
    if (cond_.size() != need) cond_.assign(need, 0.0f);
  }
  capacity_ = cfg.cond_len + 1 + n_;
  kcache_.assign(cfg.layers,
                 std::vector<float>(static_cast<size_t>(lanes_) * capacity_ *
                                    cfg.hidden));
  vcache_ = kcache_;
}

void CausalBatch::prefill(int first_target, std::vector<float>& z) {
  const ModelConfig& cfg = state_.cfg;
  if (slots_ != 0)
    throw ArgumentError("decode: prefill must run exactly once, first");
  if (first_target < 0 || first_target > n_)
    throw RangeError("decode: first target outside [0, n]");
  int H = cfg.hidden;
  std::vector<float> x(static_cast<size_t>(lanes_) * H);
  std::vector<float> z_scratch(x.size());
  for (int p = 0; p < cfg.cond_len; ++p) {
    embed_condition_slot(p);
    push_slot(buf_x_, z_scratch);
  }
  const auto& d = state_.decoder;
  const float* bos = d.get("emb.bos").vals().data();
  for (int b = 0; b < lanes_; ++b)
    std::copy(bos, bos + H, x.data() + static_cast<size_t>(b) * H);
  if (cfg.target_pos_emb) {
    int row = first_target >= n_ ? cfg.max_seq : first_target;
    const float* pt = d.get("emb.pos.target").vals().data() +
                      static_cast<size_t>(row) * H;
    for (int b = 0; b < lanes_; ++b)
      for (int i = 0; i < H; ++i) x[static_cast<size_t>(b) * H + i] += pt[i];
  }
  z.resize(x.size());
  push_slot(x, z);
}

void CausalBatch::append(const std::vector<float>& tokens, int content_idx,
                         int target_idx, std::vector<float>& z) {
  const ModelConfig& cfg = state_.cfg;
  if (slots_ < cfg.cond_len + 1)
    throw ArgumentError("decode: prefill before appending tokens");
  if (slots_ >= capacity_)
    throw RangeError("decode: sequence already holds n tokens");
  if (content_idx < 0 || content_idx >= n_)
    throw RangeError("decode: content index outside [0, n)");
  if (target_idx < 0 || target_idx > n_)
    throw RangeError("decode: target index outside [0, n]");
  int H = cfg.hidden, td = cfg.token_dim;
  if (static_cast<int>(tokens.size()) != lanes_ * td)
    throw DimensionError("decode: token buffer must be lanes * token_dim");
  const auto& d = state_.decoder;
  std::vector<float>& x = buf_x_;
  x.resize(static_cast<size_t>(lanes_) * H);
  detail::linear(lanes_, td, H, tokens.data(),
                 d.get("emb.token.w").vals().data(),
                 d.get("emb.token.b").vals().data(), x.data());
  const float* pc = d.get("emb.pos.content").vals().data() +
                    static_cast<size_t>(content_idx) * H;
  for (int b = 0; b < lanes_; ++b)
    for (int i = 0; i < H; ++i) x[static_cast<size_t>(b) * H + i] += pc[i];
  if (cfg.target_pos_emb) {
    int row = target_idx >= n_ ? cfg.max_seq : target_idx;
    const float* pt = d.get("emb.pos.target").vals().data() +
                      static_cast<size_t>(row) * H;
    for (int b = 0; b < lanes_; ++b)
      for (int i = 0; i < H; ++i) x[static_cast<size_t>(b) * H + i] += pt[i];
  }
  z.resize(x.size());
  push_slot(x, z);
}

void CausalBatch::embed_condition_slot(int p) {
  const ModelConfig& cfg = state_.cfg;
  const auto& d = state_.decoder;
  int H = cfg.hidden, cd = cfg.cond_dim, P = cfg.cond_len;
  std::vector<float> raw(static_cast<size_t>(lanes_) * cd);
  const float* fake_rows = d.get("emb.fake").vals().data();
  for (int b = 0; b < lanes_; ++b) {
    const float* src = fake_[b]
                           ? fake_rows + static_cast<size_t>(p) * cd
                           : cond_.data() +
                                 (static_cast<size_t>(b) * P + p) * cd;
    std::copy(src, src + cd, raw.data() + static_cast<size_t>(b) * cd);
  }
  buf_x_.resize(static_cast<size_t>(lanes_) * H);
  detail::linear(lanes_, cd, H, raw.data(), d.get("emb.cond.w").vals().data(),
                 d.get("emb.cond.b").vals().data(), buf_x_.data());
  const float* pos = d.get("emb.cond.pos").vals().data() +
                     static_cast<size_t>(p) * H;
  for (int b = 0; b < lanes_; ++b)
    for (int i = 0; i < H; ++i)
      buf_x_[static_cast<size_t>(b) * H + i] += pos[i];
}

void CausalBatch::push_slot(std::vector<float>& x, std::vector<float>& z_out) {
  const ModelConfig& cfg = state_.cfg;
  const auto& d = state_.decoder;
  int H = cfg.hidden, L = lanes_, s = slots_;
  int heads = cfg.heads, dh = H / heads, RH = cfg.mlp_ratio * H;
  float inv_sqrt_dh =
      1.0f / static_cast<float>(std::sqrt(static_cast<double>(dh)));
  size_t rows = static_cast<size_t>(L) * H;
  buf_h_.resize(rows);
  buf_q_.resize(rows);
  buf_k_.resize(rows);
  buf_v_.resize(rows);
  buf_ctx_.resize(rows);
  buf_mlp_.resize(static_cast<size_t>(L) * RH);
  buf_mlp2_.resize(rows);
  std::vector<float> att(static_cast<size_t>(s) + 1);

  for (int l = 0; l < cfg.layers; ++l) {
    std::string p = "l" + std::to_string(l) + ".";
    detail::affine_ln_rows(L, H, x.data(), d.get(p + "ln1.g").vals().data(),
                           d.get(p + "ln1.b").vals().data(), buf_h_.data());
    detail::linear(L, H, H, buf_h_.data(), d.get(p + "attn.wq").vals().data(),
                   d.get(p + "attn.bq").vals().data(), buf_q_.data());
    detail::linear(L, H, H, buf_h_.data(), d.get(p + "attn.wk").vals().data(),
                   d.get(p + "attn.bk").vals().data(), buf_k_.data());
    detail::linear(L, H, H, buf_h_.data(), d.get(p + "attn.wv").vals().data(),
                   d.get(p + "attn.bv").vals().data(), buf_v_.data());
    float* kc = kcache_[l].data();
    float* vc = vcache_[l].data();
    for (int b = 0; b < L; ++b) {
      size_t dst = (static_cast<size_t>(b) * capacity_ + s) * H;
      std::copy_n(buf_k_.data() + static_cast<size_t>(b) * H, H, kc + dst);
      std::copy_n(buf_v_.data() + static_cast<size_t>(b) * H, H, vc + dst);
    }
    for (int b = 0; b < L; ++b) {
      const float* lane_k = kc + static_cast<size_t>(b) * capacity_ * H;
      const float* lane_v = vc + static_cast<size_t>(b) * capacity_ * H;
      for (int hd = 0; hd < heads; ++hd) {
        const float* qh = buf_q_.data() + static_cast<size_t>(b) * H + hd * dh;
        float mx = -std::numeric_limits<float>::infinity();
        for (int j = 0; j <= s; ++j) {
          const float* kh = lane_k + static_cast<size_t>(j) * H + hd * dh;
          float dot = 0;
          for (int i = 0; i < dh; ++i) dot += qh[i] * kh[i];
          att[j] = dot * inv_sqrt_dh;
          mx = std::max(mx, att[j]);
        }
        float denom = 0;
        for (int j = 0; j <= s; ++j) {
          att[j] = std::exp(att[j] - mx);
          denom += att[j];
        }
        float* ctx = buf_ctx_.data() + static_cast<size_t>(b) * H + hd * dh;
        std::fill(ctx, ctx + dh, 0.0f);
        for (int j = 0; j <= s; ++j) {
          float w = att[j] / denom;
          const float* vh = lane_v + static_cast<size_t>(j) * H + hd * dh;
          for (int i = 0; i < dh; ++i) ctx[i] += w * vh[i];
        }
      }
    }
    detail::linear(L, H, H, buf_ctx_.data(),
                   d.get(p + "attn.wo").vals().data(),
                   d.get(p + "attn.bo").vals().data(), buf_h_.data());
    for (size_t i = 0; i < rows; ++i) x[i] += buf_h_[i];
    detail::affine_ln_rows(L, H, x.data(), d.get(p + "ln2.g").vals().data(),
                           d.get(p + "ln2.b").vals().data(), buf_h_.data());
    detail::linear(L, H, RH, buf_h_.data(), d.get(p + "mlp.w1").vals().data(),
                   d.get(p + "mlp.b1").vals().data(), buf_mlp_.data());
    detail::gelu_inplace(buf_mlp_.data(), static_cast<int64_t>(L) * RH);
    detail::linear(L, RH, H, buf_mlp_.data(),
                   d.get(p + "mlp.w2").vals().data(),
                   d.get(p + "mlp.b2").vals().data(), buf_mlp2_.data());
    for (size_t i = 0; i < rows; ++i) x[i] += buf_mlp2_[i];
  }
  z_out.resize(rows);
  if (cfg.layers > 0)
    detail::affine_ln_rows(L, H, x.data(), d.get("final.ln.g").vals().data(),
                           d.get("final.ln.b").vals().data(), z_out.data());
  else
    std::copy(x.begin(), x.end(), z_out.begin());
  ++slots_;
}

}  // namespace mntp
