#pragma once

// Named parameter registry. Registration order is the serialization order,
// so checkpoints are stable across runs of the same configuration.

#include <string>
#include <utility>
#include <vector>

#include "mntp/errors.hpp"
#include "mntp/rng.hpp"
#include "mntp/tensor.hpp"

namespace mntp {

template <class S>
struct ParamStore {
  std::vector<std::pair<std::string, Tensor<S>>> items;

  Tensor<S> add(const std::string& name, Tensor<S> t) {
    for (auto& [n, _] : items)
      if (n == name)
        throw ArgumentError("duplicate parameter name '" + name + "'");
    items.emplace_back(name, t);
    return t;
  }

  const Tensor<S>& get(const std::string& name) const {
    for (auto& [n, t] : items)
      if (n == name) return t;
    throw ArgumentError("unknown parameter '" + name + "'");
  }

  bool has(const std::string& name) const {
    for (auto& [n, _] : items)
      if (n == name) return true;
    return false;
  }

  int64_t count() const {
    int64_t total = 0;
    for (auto& [_, t] : items) total += t.size();
    return total;
  }

  void zero_grads() {
    for (auto& [_, t] : items) t.zero_grad();
  }

  // Deep copy with a scalar-type change (float training state to a double
  // replica for finite-difference checks, and back).
  template <class T>
  ParamStore<T> cast() const {
    ParamStore<T> out;
    for (auto& [n, t] : items) {
      std::vector<T> v(t.vals().begin(), t.vals().end());
      out.add(n, Tensor<T>::from(t.shape(), std::move(v), t.requires_grad()));
    }
    return out;
  }
};

template <class S>
Tensor<S> init_normal(Shape shape, double stddev, Rng& rng) {
  std::vector<S> v(shape_numel(shape));
  for (auto& x : v) x = static_cast<S>(stddev * rng.gaussian());
  return Tensor<S>::from(std::move(shape), std::move(v), true);
}

template <class S>
Tensor<S> init_zeros(Shape shape) {
  return Tensor<S>::zeros(std::move(shape), true);
}

template <class S>
Tensor<S> init_ones(Shape shape) {
  std::vector<S> v(shape_numel(shape), S(1));
  return Tensor<S>::from(std::move(shape), std::move(v), true);
}

}  // namespace mntp
