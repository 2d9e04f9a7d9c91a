#pragma once

// Reverse-mode autodiff over dense row-major tensors. Build a graph by
// calling the free-function ops, then Tensor::backward() on a scalar result.
// The op set is exactly what the models here need; rank is 1 or 2 throughout.

#include <cblas.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <memory>
#include <numeric>
#include <string>
#include <unordered_set>
#include <vector>

#include "mntp/errors.hpp"

namespace mntp {

namespace detail {

inline bool& grad_mode_flag() {
  thread_local bool enabled = true;
  return enabled;
}

}  // namespace detail

inline bool grad_enabled() { return detail::grad_mode_flag(); }

// RAII guard that disables graph construction (inference paths).
struct NoGradGuard {
  bool prev;
  NoGradGuard() : prev(detail::grad_mode_flag()) {
    detail::grad_mode_flag() = false;
  }
  ~NoGradGuard() { detail::grad_mode_flag() = prev; }
};

using Shape = std::vector<int>;

inline int64_t shape_numel(const Shape& s) {
  int64_t n = 1;
  for (int d : s) n *= d;
  return n;
}

inline std::string shape_str(const Shape& s) {
  std::string out = "(";
  for (size_t i = 0; i < s.size(); ++i) {
    if (i) out += ", ";
    out += std::to_string(s[i]);
  }
  return out + ")";
}

template <class S>
class Tensor {
 public:
  struct Node {
    Shape shape;
    std::vector<S> vals;
    std::vector<S> grad;  // allocated lazily on first accumulation
    bool requires_grad = false;
    std::vector<std::shared_ptr<Node>> parents;
    std::function<void(Node&)> backfn;  // accumulates into parents' grads

    void ensure_grad() {
      if (grad.empty()) grad.assign(vals.size(), S(0));
    }
  };

  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false) {
    Tensor t;
    t.node_ = std::make_shared<Node>();
    t.node_->shape = std::move(shape);
    t.node_->vals.assign(shape_numel(t.node_->shape), S(0));
    t.node_->requires_grad = requires_grad;
    return t;
  }

  static Tensor from(Shape shape, std::vector<S> vals,
                     bool requires_grad = false) {
    if (static_cast<int64_t>(vals.size()) != shape_numel(shape))
      throw DimensionError("Tensor::from: " + std::to_string(vals.size()) +
                           " values for shape " + shape_str(shape));
    Tensor t;
    t.node_ = std::make_shared<Node>();
    t.node_->shape = std::move(shape);
    t.node_->vals = std::move(vals);
    t.node_->requires_grad = requires_grad;
    return t;
  }

  static Tensor scalar(S v) { return from({1}, {v}); }

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  int rows() const { return node_->shape.at(0); }
  int cols() const {
    return node_->shape.size() == 2 ? node_->shape[1] : 1;
  }
  int64_t size() const { return static_cast<int64_t>(node_->vals.size()); }
  bool requires_grad() const { return node_->requires_grad; }

  const std::vector<S>& vals() const { return node_->vals; }
  // Mutating values is only meaningful on leaves (parameters, data).
  // Handles have pointer semantics, so mutation through a const handle is
  // allowed, as with std::shared_ptr.
  std::vector<S>& vals_mut() const { return node_->vals; }
  const std::vector<S>& grad() const {
    const_cast<Node*>(node_.get())->ensure_grad();
    return node_->grad;
  }
  std::vector<S>& grad_mut() const {
    node_->ensure_grad();
    return node_->grad;
  }
  void zero_grad() const {
    if (!node_->grad.empty())
      std::fill(node_->grad.begin(), node_->grad.end(), S(0));
  }

  S item() const {
    if (size() != 1)
      throw DimensionError("item() on tensor of shape " + shape_str(shape()));
    return node_->vals[0];
  }

  // Reverse pass from a scalar result. Grads accumulate into every reachable
  // node with requires_grad set (directly or through a parent chain).
  void backward() const {
    if (size() != 1)
      throw DimensionError("backward() requires a scalar tensor");
    std::vector<Node*> order;
    std::unordered_set<Node*> seen;
    std::vector<std::pair<Node*, size_t>> stack;
    stack.push_back({node_.get(), 0});
    seen.insert(node_.get());
    while (!stack.empty()) {
      auto& [n, next] = stack.back();
      if (next < n->parents.size()) {
        Node* p = n->parents[next++].get();
        if (seen.insert(p).second) stack.push_back({p, 0});
      } else {
        order.push_back(n);
        stack.pop_back();
      }
    }
    node_->ensure_grad();
    node_->grad[0] = S(1);
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
      if ((*it)->backfn) (*it)->backfn(**it);
    }
  }

  std::shared_ptr<Node> node() const { return node_; }

  static Tensor wrap(std::shared_ptr<Node> n) {
    Tensor t;
    t.node_ = std::move(n);
    return t;
  }

 private:
  std::shared_ptr<Node> node_;
};

namespace detail {

template <class S>
std::shared_ptr<typename Tensor<S>::Node> make_result(
    Shape shape, std::vector<std::shared_ptr<typename Tensor<S>::Node>> parents) {
  auto n = std::make_shared<typename Tensor<S>::Node>();
  n->shape = std::move(shape);
  n->vals.resize(shape_numel(n->shape));
  bool rg = false;
  for (auto& p : parents) rg = rg || p->requires_grad;
  n->requires_grad = rg && grad_enabled();
  if (n->requires_grad) n->parents = std::move(parents);
  return n;
}

// C = alpha * op(A) op(B) + beta * C, row-major.
template <class S>
void gemm(bool ta, bool tb, int m, int n, int k, S alpha, const S* a, int lda,
          const S* b, int ldb, S beta, S* c, int ldc) {
  if constexpr (std::is_same_v<S, float>) {
    cblas_sgemm(CblasRowMajor, ta ? CblasTrans : CblasNoTrans,
                tb ? CblasTrans : CblasNoTrans, m, n, k, alpha, a, lda, b, ldb,
                beta, c, ldc);
  } else {
    cblas_dgemm(CblasRowMajor, ta ? CblasTrans : CblasNoTrans,
                tb ? CblasTrans : CblasNoTrans, m, n, k, alpha, a, lda, b, ldb,
                beta, c, ldc);
  }
}

// Broadcast check: b must equal a's shape or a trailing suffix of it.
template <class S>
int64_t broadcast_repeat(const Tensor<S>& a, const Tensor<S>& b,
                         const char* opname) {
  const Shape& sa = a.shape();
  const Shape& sb = b.shape();
  if (sb.size() > sa.size())
    throw DimensionError(std::string(opname) + ": shape " + shape_str(sb) +
                         " does not broadcast against " + shape_str(sa));
  size_t off = sa.size() - sb.size();
  for (size_t i = 0; i < sb.size(); ++i) {
    if (sa[off + i] != sb[i])
      throw DimensionError(std::string(opname) + ": shape " + shape_str(sb) +
                           " does not broadcast against " + shape_str(sa));
  }
  return a.size() / std::max<int64_t>(b.size(), 1);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Ops

template <class S>
Tensor<S> matmul(const Tensor<S>& a, const Tensor<S>& b) {
  if (a.shape().size() != 2 || b.shape().size() != 2)
    throw DimensionError("matmul expects rank-2 tensors");
  int m = a.shape()[0], k = a.shape()[1], k2 = b.shape()[0], n = b.shape()[1];
  if (k != k2)
    throw DimensionError("matmul: inner dimensions disagree, " +
                         shape_str(a.shape()) + " x " + shape_str(b.shape()));
  auto node = detail::make_result<S>({m, n}, {a.node(), b.node()});
  detail::gemm<S>(false, false, m, n, k, S(1), a.vals().data(), k,
                  b.vals().data(), n, S(0), node->vals.data(), n);
  if (node->requires_grad) {
    auto an = a.node(), bn = b.node();
    node->backfn = [an, bn, m, n, k](typename Tensor<S>::Node& self) {
      if (an->requires_grad) {
        an->ensure_grad();
        detail::gemm<S>(false, true, m, k, n, S(1), self.grad.data(), n,
                        bn->vals.data(), n, S(1), an->grad.data(), k);
      }
      if (bn->requires_grad) {
        bn->ensure_grad();
        detail::gemm<S>(true, false, k, n, m, S(1), an->vals.data(), k,
                        self.grad.data(), n, S(1), bn->grad.data(), n);
      }
    };
  }
  return Tensor<S>::wrap(node);
}

// a (m, k) times b-transposed (n, k) -> (m, n). Attention scores q k^T.
template <class S>
Tensor<S> matmul_nt(const Tensor<S>& a, const Tensor<S>& b) {
  if (a.shape().size() != 2 || b.shape().size() != 2)
    throw DimensionError("matmul_nt expects rank-2 tensors");
  int m = a.shape()[0], k = a.shape()[1], n = b.shape()[0];
  if (k != b.shape()[1])
    throw DimensionError("matmul_nt: inner dimensions disagree, " +
                         shape_str(a.shape()) + " x " + shape_str(b.shape()) +
                         "^T");
  auto node = detail::make_result<S>({m, n}, {a.node(), b.node()});
  detail::gemm<S>(false, true, m, n, k, S(1), a.vals().data(), k,
                  b.vals().data(), k, S(0), node->vals.data(), n);
  if (node->requires_grad) {
    auto an = a.node(), bn = b.node();
    node->backfn = [an, bn, m, n, k](typename Tensor<S>::Node& self) {
      if (an->requires_grad) {
        an->ensure_grad();
        detail::gemm<S>(false, false, m, k, n, S(1), self.grad.data(), n,
                        bn->vals.data(), k, S(1), an->grad.data(), k);
      }
      if (bn->requires_grad) {
        bn->ensure_grad();
        detail::gemm<S>(true, false, n, k, m, S(1), self.grad.data(), n,
                        an->vals.data(), k, S(1), bn->grad.data(), k);
      }
    };
  }
  return Tensor<S>::wrap(node);
}

template <class S>
Tensor<S> add(const Tensor<S>& a, const Tensor<S>& b) {
  int64_t rep = detail::broadcast_repeat(a, b, "add");
  int64_t bn_ = b.size();
  auto node = detail::make_result<S>(a.shape(), {a.node(), b.node()});
  const S* pa = a.vals().data();
  const S* pb = b.vals().data();
  S* pc = node->vals.data();
  for (int64_t r = 0; r < rep; ++r)
    for (int64_t i = 0; i < bn_; ++i) pc[r * bn_ + i] = pa[r * bn_ + i] + pb[i];
  if (node->requires_grad) {
    auto an = a.node(), bn = b.node();
    node->backfn = [an, bn, rep, bn_](typename Tensor<S>::Node& self) {
      if (an->requires_grad) {
        an->ensure_grad();
        for (size_t i = 0; i < self.grad.size(); ++i)
          an->grad[i] += self.grad[i];
      }
      if (bn->requires_grad) {
        bn->ensure_grad();
        for (int64_t r = 0; r < rep; ++r)
          for (int64_t i = 0; i < bn_; ++i)
            bn->grad[i] += self.grad[r * bn_ + i];
      }
    };
  }
  return Tensor<S>::wrap(node);
}

template <class S>
Tensor<S> sub(const Tensor<S>& a, const Tensor<S>& b) {
  int64_t rep = detail::broadcast_repeat(a, b, "sub");
  int64_t bn_ = b.size();
  auto node = detail::make_result<S>(a.shape(), {a.node(), b.node()});
  const S* pa = a.vals().data();
  const S* pb = b.vals().data();
  S* pc = node->vals.data();
  for (int64_t r = 0; r < rep; ++r)
    for (int64_t i = 0; i < bn_; ++i) pc[r * bn_ + i] = pa[r * bn_ + i] - pb[i];
  if (node->requires_grad) {
    auto an = a.node(), bn = b.node();
    node->backfn = [an, bn, rep, bn_](typename Tensor<S>::Node& self) {
      if (an->requires_grad) {
        an->ensure_grad();
        for (size_t i = 0; i < self.grad.size(); ++i)
          an->grad[i] += self.grad[i];
      }
      if (bn->requires_grad) {
        bn->ensure_grad();
        for (int64_t r = 0; r < rep; ++r)
          for (int64_t i = 0; i < bn_; ++i)
            bn->grad[i] -= self.grad[r * bn_ + i];
      }
    };
  }
  return Tensor<S>::wrap(node);
}

template <class S>
Tensor<S> mul(const Tensor<S>& a, const Tensor<S>& b) {
  int64_t rep = detail::broadcast_repeat(a, b, "mul");
  int64_t bn_ = b.size();
  auto node = detail::make_result<S>(a.shape(), {a.node(), b.node()});
  const S* pa = a.vals().data();
  const S* pb = b.vals().data();
  S* pc = node->vals.data();
  for (int64_t r = 0; r < rep; ++r)
    for (int64_t i = 0; i < bn_; ++i) pc[r * bn_ + i] = pa[r * bn_ + i] * pb[i];
  if (node->requires_grad) {
    auto an = a.node(), bn = b.node();
    node->backfn = [an, bn, rep, bn_](typename Tensor<S>::Node& self) {
      if (an->requires_grad) {
        an->ensure_grad();
        for (int64_t r = 0; r < rep; ++r)
          for (int64_t i = 0; i < bn_; ++i)
            an->grad[r * bn_ + i] += self.grad[r * bn_ + i] * bn->vals[i];
      }
      if (bn->requires_grad) {
        bn->ensure_grad();
        for (int64_t r = 0; r < rep; ++r)
          for (int64_t i = 0; i < bn_; ++i)
            bn->grad[i] += self.grad[r * bn_ + i] * an->vals[r * bn_ + i];
      }
    };
  }
  return Tensor<S>::wrap(node);
}

template <class S>
Tensor<S> scale(const Tensor<S>& a, S c) {
  auto node = detail::make_result<S>(a.shape(), {a.node()});
  for (int64_t i = 0; i < a.size(); ++i) node->vals[i] = a.vals()[i] * c;
  if (node->requires_grad) {
    auto an = a.node();
    node->backfn = [an, c](typename Tensor<S>::Node& self) {
      an->ensure_grad();
      for (size_t i = 0; i < self.grad.size(); ++i)
        an->grad[i] += self.grad[i] * c;
    };
  }
  return Tensor<S>::wrap(node);
}

template <class S>
Tensor<S> silu(const Tensor<S>& x) {
  auto node = detail::make_result<S>(x.shape(), {x.node()});
  for (int64_t i = 0; i < x.size(); ++i) {
    S v = x.vals()[i];
    node->vals[i] = v / (S(1) + std::exp(-v));
  }
  if (node->requires_grad) {
    auto xn = x.node();
    node->backfn = [xn](typename Tensor<S>::Node& self) {
      xn->ensure_grad();
      for (size_t i = 0; i < self.grad.size(); ++i) {
        S v = xn->vals[i];
        S sg = S(1) / (S(1) + std::exp(-v));
        xn->grad[i] += self.grad[i] * sg * (S(1) + v * (S(1) - sg));
      }
    };
  }
  return Tensor<S>::wrap(node);
}

// Exact (erf-based) GELU.
template <class S>
Tensor<S> gelu(const Tensor<S>& x) {
  auto node = detail::make_result<S>(x.shape(), {x.node()});
  for (int64_t i = 0; i < x.size(); ++i) {
    S v = x.vals()[i];
    node->vals[i] = S(0.5) * v * (S(1) + std::erf(v * S(M_SQRT1_2)));
  }
  if (node->requires_grad) {
    auto xn = x.node();
    node->backfn = [xn](typename Tensor<S>::Node& self) {
      xn->ensure_grad();
      const S inv_sqrt2pi = S(0.3989422804014327);
      for (size_t i = 0; i < self.grad.size(); ++i) {
        S v = xn->vals[i];
        S cdf = S(0.5) * (S(1) + std::erf(v * S(M_SQRT1_2)));
        S pdf = inv_sqrt2pi * std::exp(S(-0.5) * v * v);
        xn->grad[i] += self.grad[i] * (cdf + v * pdf);
      }
    };
  }
  return Tensor<S>::wrap(node);
}

// Softmax over the last dimension, max-shifted for stability.
template <class S>
Tensor<S> softmax_lastdim(const Tensor<S>& x) {
  int64_t d = x.shape().back();
  int64_t rows = x.size() / d;
  auto node = detail::make_result<S>(x.shape(), {x.node()});
  for (int64_t r = 0; r < rows; ++r) {
    const S* in = x.vals().data() + r * d;
    S* out = node->vals.data() + r * d;
    S mx = in[0];
    for (int64_t i = 1; i < d; ++i) mx = std::max(mx, in[i]);
    S sum = S(0);
    for (int64_t i = 0; i < d; ++i) {
      out[i] = std::exp(in[i] - mx);
      sum += out[i];
    }
    for (int64_t i = 0; i < d; ++i) out[i] /= sum;
  }
  if (node->requires_grad) {
    auto xn = x.node();
    node->backfn = [xn, rows, d](typename Tensor<S>::Node& self) {
      xn->ensure_grad();
      for (int64_t r = 0; r < rows; ++r) {
        const S* y = self.vals.data() + r * d;
        const S* dy = self.grad.data() + r * d;
        S* dx = xn->grad.data() + r * d;
        S dot = S(0);
        for (int64_t i = 0; i < d; ++i) dot += dy[i] * y[i];
        for (int64_t i = 0; i < d; ++i) dx[i] += (dy[i] - dot) * y[i];
      }
    };
  }
  return Tensor<S>::wrap(node);
}

// Layer normalization over the last dimension, without an affine part
// (apply a separate mul/add for gain and bias). A constant row normalizes
// to exact zeros because the centered values vanish before the division.
template <class S>
Tensor<S> layernorm_lastdim(const Tensor<S>& x, S eps = S(1e-5)) {
  int64_t d = x.shape().back();
  int64_t rows = x.size() / d;
  auto node = detail::make_result<S>(x.shape(), {x.node()});
  std::vector<S> inv_sigma(rows);
  for (int64_t r = 0; r < rows; ++r) {
    const S* in = x.vals().data() + r * d;
    S* out = node->vals.data() + r * d;
    S mean = S(0);
    for (int64_t i = 0; i < d; ++i) mean += in[i];
    mean /= S(d);
    S var = S(0);
    for (int64_t i = 0; i < d; ++i) var += (in[i] - mean) * (in[i] - mean);
    var /= S(d);
    S is = S(1) / std::sqrt(var + eps);
    inv_sigma[r] = is;
    for (int64_t i = 0; i < d; ++i) out[i] = (in[i] - mean) * is;
  }
  if (node->requires_grad) {
    auto xn = x.node();
    node->backfn = [xn, rows, d,
                    inv_sigma = std::move(inv_sigma)](typename Tensor<S>::Node& self) {
      xn->ensure_grad();
      for (int64_t r = 0; r < rows; ++r) {
        const S* y = self.vals.data() + r * d;
        const S* dy = self.grad.data() + r * d;
        S* dx = xn->grad.data() + r * d;
        S mean_dy = S(0), mean_dyy = S(0);
        for (int64_t i = 0; i < d; ++i) {
          mean_dy += dy[i];
          mean_dyy += dy[i] * y[i];
        }
        mean_dy /= S(d);
        mean_dyy /= S(d);
        for (int64_t i = 0; i < d; ++i)
          dx[i] += inv_sigma[r] * (dy[i] - mean_dy - y[i] * mean_dyy);
      }
    };
  }
  return Tensor<S>::wrap(node);
}

template <class S>
Tensor<S> sum(const Tensor<S>& x) {
  auto node = detail::make_result<S>({1}, {x.node()});
  S s = S(0);
  for (int64_t i = 0; i < x.size(); ++i) s += x.vals()[i];
  node->vals[0] = s;
  if (node->requires_grad) {
    auto xn = x.node();
    node->backfn = [xn](typename Tensor<S>::Node& self) {
      xn->ensure_grad();
      for (auto& g : xn->grad) g += self.grad[0];
    };
  }
  return Tensor<S>::wrap(node);
}

template <class S>
Tensor<S> mean(const Tensor<S>& x) {
  if (x.size() == 0) throw DimensionError("mean of empty tensor");
  return scale(sum(x), S(1) / S(x.size()));
}

// Mean squared error over all elements.
template <class S>
Tensor<S> mse(const Tensor<S>& a, const Tensor<S>& b) {
  if (a.shape() != b.shape())
    throw DimensionError("mse: shapes differ, " + shape_str(a.shape()) +
                         " vs " + shape_str(b.shape()));
  auto node = detail::make_result<S>({1}, {a.node(), b.node()});
  S s = S(0);
  for (int64_t i = 0; i < a.size(); ++i) {
    S d = a.vals()[i] - b.vals()[i];
    s += d * d;
  }
  node->vals[0] = s / S(a.size());
  if (node->requires_grad) {
    auto an = a.node(), bn = b.node();
    int64_t n = a.size();
    node->backfn = [an, bn, n](typename Tensor<S>::Node& self) {
      S c = S(2) * self.grad[0] / S(n);
      if (an->requires_grad) an->ensure_grad();
      if (bn->requires_grad) bn->ensure_grad();
      for (int64_t i = 0; i < n; ++i) {
        S d = c * (an->vals[i] - bn->vals[i]);
        if (an->requires_grad) an->grad[i] += d;
        if (bn->requires_grad) bn->grad[i] -= d;
      }
    };
  }
  return Tensor<S>::wrap(node);
}

// Sum over the last dimension; an (m, n) input yields shape (m).
template <class S>
Tensor<S> rowsum_lastdim(const Tensor<S>& x) {
  if (x.shape().size() != 2)
    throw DimensionError("rowsum_lastdim expects a rank-2 tensor");
  int64_t m = x.shape()[0], n = x.shape()[1];
  auto node = detail::make_result<S>({static_cast<int>(m)}, {x.node()});
  for (int64_t r = 0; r < m; ++r) {
    S s = S(0);
    for (int64_t i = 0; i < n; ++i) s += x.vals()[r * n + i];
    node->vals[r] = s;
  }
  if (node->requires_grad) {
    auto xn = x.node();
    node->backfn = [xn, m, n](typename Tensor<S>::Node& self) {
      xn->ensure_grad();
      for (int64_t r = 0; r < m; ++r)
        for (int64_t i = 0; i < n; ++i) xn->grad[r * n + i] += self.grad[r];
    };
  }
  return Tensor<S>::wrap(node);
}

// Row gather. Index -1 yields a zero row and routes no gradient; other
// indices must be valid rows of the table.
template <class S>
Tensor<S> gather_rows(const Tensor<S>& table, const std::vector<int>& idx) {
  if (table.shape().size() != 2)
    throw DimensionError("gather_rows expects a rank-2 table");
  int rows = table.shape()[0], d = table.shape()[1];
  for (int i : idx)
    if (i < -1 || i >= rows)
      throw RangeError("gather_rows: index " + std::to_string(i) +
                       " outside table with " + std::to_string(rows) + " rows");
  auto node = detail::make_result<S>({static_cast<int>(idx.size()), d},
                                     {table.node()});
  for (size_t r = 0; r < idx.size(); ++r) {
    S* out = node->vals.data() + r * d;
    if (idx[r] < 0) {
      std::fill(out, out + d, S(0));
    } else {
      const S* in = table.vals().data() + static_cast<int64_t>(idx[r]) * d;
      std::copy(in, in + d, out);
    }
  }
  if (node->requires_grad) {
    auto tn = table.node();
    node->backfn = [tn, idx, d](typename Tensor<S>::Node& self) {
      tn->ensure_grad();
      for (size_t r = 0; r < idx.size(); ++r) {
        if (idx[r] < 0) continue;
        const S* g = self.grad.data() + r * d;
        S* dst = tn->grad.data() + static_cast<int64_t>(idx[r]) * d;
        for (int i = 0; i < d; ++i) dst[i] += g[i];
      }
    };
  }
  return Tensor<S>::wrap(node);
}

// Repeat a rank-1 row vector into (count, d).
template <class S>
Tensor<S> repeat_row(const Tensor<S>& row, int count) {
  if (row.shape().size() != 1)
    throw DimensionError("repeat_row expects a rank-1 tensor");
  int d = row.shape()[0];
  auto node = detail::make_result<S>({count, d}, {row.node()});
  for (int r = 0; r < count; ++r)
    std::copy(row.vals().begin(), row.vals().end(),
              node->vals.begin() + static_cast<int64_t>(r) * d);
  if (node->requires_grad) {
    auto rn = row.node();
    node->backfn = [rn, count, d](typename Tensor<S>::Node& self) {
      rn->ensure_grad();
      for (int r = 0; r < count; ++r)
        for (int i = 0; i < d; ++i) rn->grad[i] += self.grad[r * d + i];
    };
  }
  return Tensor<S>::wrap(node);
}

template <class S>
Tensor<S> slice_rows(const Tensor<S>& x, int start, int count) {
  if (x.shape().size() != 2)
    throw DimensionError("slice_rows expects a rank-2 tensor");
  int m = x.shape()[0], d = x.shape()[1];
  if (start < 0 || count < 0 || start + count > m)
    throw RangeError("slice_rows: [" + std::to_string(start) + ", " +
                     std::to_string(start + count) + ") outside " +
                     std::to_string(m) + " rows");
  auto node = detail::make_result<S>({count, d}, {x.node()});
  std::copy(x.vals().begin() + static_cast<int64_t>(start) * d,
            x.vals().begin() + static_cast<int64_t>(start + count) * d,
            node->vals.begin());
  if (node->requires_grad) {
    auto xn = x.node();
    node->backfn = [xn, start, count, d](typename Tensor<S>::Node& self) {
      xn->ensure_grad();
      for (int64_t i = 0; i < static_cast<int64_t>(count) * d; ++i)
        xn->grad[static_cast<int64_t>(start) * d + i] += self.grad[i];
    };
  }
  return Tensor<S>::wrap(node);
}

template <class S>
Tensor<S> slice_cols(const Tensor<S>& x, int start, int count) {
  if (x.shape().size() != 2)
    throw DimensionError("slice_cols expects a rank-2 tensor");
  int m = x.shape()[0], d = x.shape()[1];
  if (start < 0 || count < 0 || start + count > d)
    throw RangeError("slice_cols: [" + std::to_string(start) + ", " +
                     std::to_string(start + count) + ") outside " +
                     std::to_string(d) + " cols");
  auto node = detail::make_result<S>({m, count}, {x.node()});
  for (int r = 0; r < m; ++r)
    std::copy(x.vals().begin() + static_cast<int64_t>(r) * d + start,
              x.vals().begin() + static_cast<int64_t>(r) * d + start + count,
              node->vals.begin() + static_cast<int64_t>(r) * count);
  if (node->requires_grad) {
    auto xn = x.node();
    node->backfn = [xn, start, count, d, m](typename Tensor<S>::Node& self) {
      xn->ensure_grad();
      for (int r = 0; r < m; ++r)
        for (int i = 0; i < count; ++i)
          xn->grad[static_cast<int64_t>(r) * d + start + i] +=
              self.grad[static_cast<int64_t>(r) * count + i];
    };
  }
  return Tensor<S>::wrap(node);
}

template <class S>
Tensor<S> concat_rows(const std::vector<Tensor<S>>& parts) {
  if (parts.empty()) throw DimensionError("concat_rows of nothing");
  int d = parts[0].shape().size() == 2 ? parts[0].shape()[1] : -1;
  int total = 0;
  std::vector<std::shared_ptr<typename Tensor<S>::Node>> parents;
  for (auto& p : parts) {
    if (p.shape().size() != 2 || p.shape()[1] != d)
      throw DimensionError("concat_rows: column counts disagree");
    total += p.shape()[0];
    parents.push_back(p.node());
  }
  auto node = detail::make_result<S>({total, d}, std::move(parents));
  int64_t off = 0;
  for (auto& p : parts) {
    std::copy(p.vals().begin(), p.vals().end(), node->vals.begin() + off);
    off += p.size();
  }
  if (node->requires_grad) {
    std::vector<std::shared_ptr<typename Tensor<S>::Node>> srcs;
    for (auto& p : parts) srcs.push_back(p.node());
    node->backfn = [srcs](typename Tensor<S>::Node& self) {
      int64_t off = 0;
      for (auto& s : srcs) {
        int64_t n = static_cast<int64_t>(s->vals.size());
        if (s->requires_grad) {
          s->ensure_grad();
          for (int64_t i = 0; i < n; ++i) s->grad[i] += self.grad[off + i];
        }
        off += n;
      }
    };
  }
  return Tensor<S>::wrap(node);
}

template <class S>
Tensor<S> concat_cols(const std::vector<Tensor<S>>& parts) {
  if (parts.empty()) throw DimensionError("concat_cols of nothing");
  int m = parts[0].shape().size() == 2 ? parts[0].shape()[0] : -1;
  int total = 0;
  std::vector<std::shared_ptr<typename Tensor<S>::Node>> parents;
  for (auto& p : parts) {
    if (p.shape().size() != 2 || p.shape()[0] != m)
      throw DimensionError("concat_cols: row counts disagree");
    total += p.shape()[1];
    parents.push_back(p.node());
  }
  auto node = detail::make_result<S>({m, total}, std::move(parents));
  int64_t off = 0;
  for (auto& p : parts) {
    int d = p.shape()[1];
    for (int r = 0; r < m; ++r)
      std::copy(p.vals().begin() + static_cast<int64_t>(r) * d,
                p.vals().begin() + static_cast<int64_t>(r + 1) * d,
                node->vals.begin() + static_cast<int64_t>(r) * total + off);
    off += d;
  }
  if (node->requires_grad) {
    std::vector<std::shared_ptr<typename Tensor<S>::Node>> srcs;
    for (auto& p : parts) srcs.push_back(p.node());
    node->backfn = [srcs, m, total](typename Tensor<S>::Node& self) {
      int64_t off = 0;
      for (auto& s : srcs) {
        int d = s->shape[1];
        if (s->requires_grad) {
          s->ensure_grad();
          for (int r = 0; r < m; ++r)
            for (int i = 0; i < d; ++i)
              s->grad[static_cast<int64_t>(r) * d + i] +=
                  self.grad[static_cast<int64_t>(r) * total + off + i];
        }
        off += d;
      }
    };
  }
  return Tensor<S>::wrap(node);
}

}  // namespace mntp
