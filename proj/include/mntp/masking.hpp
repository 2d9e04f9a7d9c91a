#pragma once

// Masking-ratio schedules, per-sequence mask plans, and the generalized
// causal language-modeling mask. Indices are 0-based; the "no target"
// sentinel is n (one past the last position).

#include <cstdint>
#include <string>
#include <vector>

#include "mntp/rng.hpp"

namespace mntp {

enum class MaskStrategy { none, drop, zero, gaussian };

MaskStrategy mask_strategy_from(const std::string& name);
std::string to_string(MaskStrategy s);

struct ScheduleComponent {
  enum class Kind { normal, truncnorm, fixed, uniform };
  Kind kind = Kind::uniform;
  double mean = 0, stddev = 0;    // normal / truncnorm
  double lo = 0, hi = 1;          // truncnorm support
  double value = 0;               // fixed
  double weight = 1;
};

struct MaskSchedule {
  std::vector<ScheduleComponent> components;  // weights must sum to 1
};

// Known presets: mixture-default, mar-range, mar-shifted, fixed-0.7, uniform.
MaskSchedule schedule_preset(const std::string& name);

// One masking ratio in [0, 1]. Truncation is by rejection, so draws follow
// the exact truncated density.
double sample_ratio(const MaskSchedule& sched, Rng& rng);

// Exact CDF (and its left limit, which differs only at fixed-point atoms).
double schedule_cdf(const MaskSchedule& sched, double x);
double schedule_cdf_left(const MaskSchedule& sched, double x);

// Half-away-from-zero rounding, the convention for masked-count arithmetic.
int round_half_away(double x);

struct MaskPlan {
  int n = 0;
  int masked_count = 0;
  std::vector<uint8_t> keep;  // size n, 1 = visible
  std::vector<int> kept;      // ascending
  std::vector<int> masked;    // ascending
};

// Masks round_half_away(n * ratio) positions chosen uniformly at random.
MaskPlan sample_plan(int n, double ratio, Rng& rng);

// Plan from an explicit keep vector (tests, generalized masks).
MaskPlan plan_from_keep(std::vector<uint8_t> keep);

// Skip-prediction targets: slot j (holding kept[j]) points at the next kept
// original index, or the sentinel n when none follows.
std::vector<int> skip_targets(const MaskPlan& plan);

// Target for the start slot: the first kept index, or the sentinel n.
int first_kept_or_sentinel(const MaskPlan& plan);

// Generalized causal LM keep vector: position j is visible iff j is the
// query position i, the future target f, or a chosen past position.
// Requires 0 <= i < f < n and past_subset within [0, i).
std::vector<uint8_t> gclm_mask(int n, int i, const std::vector<int>& past_subset,
                               int f);

}  // namespace mntp
