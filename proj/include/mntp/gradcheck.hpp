#pragma once

// Finite-difference gradient checking. The checker treats the function under
// test as a black box from leaf values to a scalar, so it validates the whole
// graph (forward kernels and backward closures together).

#include <cmath>
#include <cstdint>
#include <functional>
#include <vector>

#include "mntp/tensor.hpp"

namespace mntp {

struct GradCheckResult {
  double max_rel_err = 0.0;
  double max_abs_err = 0.0;
  int64_t checked = 0;
};

// Central differences on each listed coordinate of each leaf. `loss_fn` must
// rebuild the graph from the leaves' current values on every call.
// Relative error uses max(|analytic| + |numeric|, floor) as denominator.
template <class S>
GradCheckResult grad_check(
    const std::function<Tensor<S>()>& loss_fn, std::vector<Tensor<S>> leaves,
    const std::vector<std::vector<int64_t>>& coords, S step,
    double denom_floor = 1e-6) {
  // Analytic pass.
  for (auto& l : leaves) l.zero_grad();
  Tensor<S> loss = loss_fn();
  loss.backward();
  std::vector<std::vector<S>> analytic;
  for (auto& l : leaves) analytic.push_back(l.grad());

  GradCheckResult res;
  for (size_t li = 0; li < leaves.size(); ++li) {
    for (int64_t c : coords[li]) {
      S saved = leaves[li].vals_mut()[c];
      leaves[li].vals_mut()[c] = saved + step;
      double up;
      {
        NoGradGuard ng;
        up = static_cast<double>(loss_fn().item());
      }
      leaves[li].vals_mut()[c] = saved - step;
      double down;
      {
        NoGradGuard ng;
        down = static_cast<double>(loss_fn().item());
      }
      leaves[li].vals_mut()[c] = saved;
      double numeric = (up - down) / (2.0 * static_cast<double>(step));
      double exact = static_cast<double>(analytic[li][c]);
      double abs_err = std::abs(numeric - exact);
      double denom = std::max(std::abs(numeric) + std::abs(exact), denom_floor);
      res.max_abs_err = std::max(res.max_abs_err, abs_err);
      res.max_rel_err = std::max(res.max_rel_err, abs_err / denom);
      ++res.checked;
    }
  }
  return res;
}

// Convenience: check every coordinate of every leaf.
template <class S>
GradCheckResult grad_check_all(const std::function<Tensor<S>()>& loss_fn,
                               std::vector<Tensor<S>> leaves, S step) {
  std::vector<std::vector<int64_t>> coords;
  for (auto& l : leaves) {
    std::vector<int64_t> all(l.size());
    for (int64_t i = 0; i < l.size(); ++i) all[i] = i;
    coords.push_back(std::move(all));
  }
  return grad_check<S>(loss_fn, std::move(leaves), coords, step);
}

}  // namespace mntp
