#include "mntp/masking.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "mntp/errors.hpp"

namespace mntp {

namespace {

double normal_cdf(double z) { return 0.5 * (1.0 + std::erf(z * M_SQRT1_2)); }

// CDF of one component; `left` asks for the left limit (matters for atoms).
double component_cdf(const ScheduleComponent& c, double x, bool left) {
  switch (c.kind) {
    case ScheduleComponent::Kind::fixed:
      if (left) return x > c.value ? 1.0 : 0.0;
      return x >= c.value ? 1.0 : 0.0;
    case ScheduleComponent::Kind::uniform:
      return std::clamp(x, 0.0, 1.0);
    case ScheduleComponent::Kind::normal:
    case ScheduleComponent::Kind::truncnorm: {
      double lo = c.kind == ScheduleComponent::Kind::normal ? 0.0 : c.lo;
      double hi = c.kind == ScheduleComponent::Kind::normal ? 1.0 : c.hi;
      if (x <= lo) return 0.0;
      if (x >= hi) return 1.0;
      double flo = normal_cdf((lo - c.mean) / c.stddev);
      double fhi = normal_cdf((hi - c.mean) / c.stddev);
      return (normal_cdf((x - c.mean) / c.stddev) - flo) / (fhi - flo);
    }
  }
  throw ArgumentError("schedule: unknown component kind");
}

void validate(const MaskSchedule& sched) {
  if (sched.components.empty())
    throw ArgumentError("schedule: needs at least one component");
  double wsum = 0;
  for (const auto& c : sched.components) {
    if (c.weight <= 0) throw ArgumentError("schedule: weights must be positive");
    wsum += c.weight;
    if (c.kind == ScheduleComponent::Kind::truncnorm ||
        c.kind == ScheduleComponent::Kind::normal) {
      double lo = c.kind == ScheduleComponent::Kind::normal ? 0.0 : c.lo;
      double hi = c.kind == ScheduleComponent::Kind::normal ? 1.0 : c.hi;
      if (!(c.stddev > 0)) throw ArgumentError("schedule: stddev must be > 0");
      if (!(lo < hi) || lo < 0.0 || hi > 1.0)
        throw ArgumentError("schedule: truncation bounds must satisfy "
                            "0 <= lo < hi <= 1");
    }
    if (c.kind == ScheduleComponent::Kind::fixed &&
        (c.value < 0.0 || c.value > 1.0))
      throw ArgumentError("schedule: fixed ratio outside [0, 1]");
  }
  if (std::abs(wsum - 1.0) > 1e-9)
    throw ArgumentError("schedule: component weights must sum to 1");
}

double sample_component(const ScheduleComponent& c, Rng& rng) {
  switch (c.kind) {
    case ScheduleComponent::Kind::fixed:
      return c.value;
    case ScheduleComponent::Kind::uniform:
      return rng.uniform();
    case ScheduleComponent::Kind::normal:
    case ScheduleComponent::Kind::truncnorm: {
      double lo = c.kind == ScheduleComponent::Kind::normal ? 0.0 : c.lo;
      double hi = c.kind == ScheduleComponent::Kind::normal ? 1.0 : c.hi;
      for (int attempt = 0; attempt < 100000; ++attempt) {
        double v = c.mean + c.stddev * rng.gaussian();
        if (v >= lo && v <= hi) return v;
      }
      throw NumericError("schedule: rejection sampling failed to land in "
                         "the truncation window");
    }
  }
  throw ArgumentError("schedule: unknown component kind");
}

}  // namespace

MaskStrategy mask_strategy_from(const std::string& name) {
  if (name == "none") return MaskStrategy::none;
  if (name == "drop") return MaskStrategy::drop;
  if (name == "zero") return MaskStrategy::zero;
  if (name == "gaussian") return MaskStrategy::gaussian;
  throw ArgumentError("unknown mask strategy '" + name + "'");
}

std::string to_string(MaskStrategy s) {
  switch (s) {
    case MaskStrategy::none: return "none";
    case MaskStrategy::drop: return "drop";
    case MaskStrategy::zero: return "zero";
    case MaskStrategy::gaussian: return "gaussian";
  }
  return "?";
}

MaskSchedule schedule_preset(const std::string& name) {
  MaskSchedule s;
  auto tn = [](double mean, double sd, double lo, double hi, double w) {
    ScheduleComponent c;
    c.kind = ScheduleComponent::Kind::truncnorm;
    c.mean = mean;
    c.stddev = sd;
    c.lo = lo;
    c.hi = hi;
    c.weight = w;
    return c;
  };
  if (name == "mixture-default") {
    // Half the draws favor near-total masking, half a medium band; together
    // they cover both the hard and the informative regimes.
    s.components = {tn(0.95, 0.15, 0.0, 1.0, 0.5), tn(0.55, 0.25, 0.0, 1.0, 0.5)};
  } else if (name == "mar-range") {
    s.components = {tn(1.0, 0.25, 0.7, 1.0, 1.0)};
  } else if (name == "mar-shifted") {
    s.components = {tn(0.85, 0.25, 0.55, 0.85, 1.0)};
  } else if (name == "fixed-0.7") {
    ScheduleComponent c;
    c.kind = ScheduleComponent::Kind::fixed;
    c.value = 0.7;
    s.components = {c};
  } else if (name == "uniform") {
    ScheduleComponent c;
    c.kind = ScheduleComponent::Kind::uniform;
    s.components = {c};
  } else {
    throw ArgumentError("unknown schedule preset '" + name + "'");
  }
  validate(s);
  return s;
}

double sample_ratio(const MaskSchedule& sched, Rng& rng) {
  validate(sched);
  const ScheduleComponent* chosen = &sched.components[0];
  if (sched.components.size() > 1) {
    double u = rng.uniform();
    double acc = 0;
    for (const auto& c : sched.components) {
      acc += c.weight;
      if (u < acc) {
        chosen = &c;
        break;
      }
      chosen = &c;  // numerical tail: last component
    }
  }
  return sample_component(*chosen, rng);
}

double schedule_cdf(const MaskSchedule& sched, double x) {
  validate(sched);
  double acc = 0;
  for (const auto& c : sched.components)
    acc += c.weight * component_cdf(c, x, false);
  return acc;
}

double schedule_cdf_left(const MaskSchedule& sched, double x) {
  validate(sched);
  double acc = 0;
  for (const auto& c : sched.components)
    acc += c.weight * component_cdf(c, x, true);
  return acc;
}

int round_half_away(double x) {
  return static_cast<int>(std::round(x));
}

MaskPlan sample_plan(int n, double ratio, Rng& rng) {
  if (n <= 0) throw ArgumentError("sample_plan: n must be positive");
  if (ratio < 0.0 || ratio > 1.0)
    throw RangeError("sample_plan: ratio " + std::to_string(ratio) +
                     " outside [0, 1]");
  int m = round_half_away(n * ratio);
  // Uniform m-subset by partial Fisher-Yates over the index array.
  std::vector<int> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  for (int i = 0; i < m; ++i) {
    int j = i + static_cast<int>(rng.below(static_cast<uint64_t>(n - i)));
    std::swap(idx[i], idx[j]);
  }
  std::vector<uint8_t> keep(n, 1);
  for (int i = 0; i < m; ++i) keep[idx[i]] = 0;
  MaskPlan plan = plan_from_keep(std::move(keep));
  return plan;
}

MaskPlan plan_from_keep(std::vector<uint8_t> keep) {
  MaskPlan plan;
  plan.n = static_cast<int>(keep.size());
  plan.keep = std::move(keep);
  for (int i = 0; i < plan.n; ++i) {
    if (plan.keep[i])
      plan.kept.push_back(i);
    else
      plan.masked.push_back(i);
  }
  plan.masked_count = static_cast<int>(plan.masked.size());
  return plan;
}

std::vector<int> skip_targets(const MaskPlan& plan) {
  std::vector<int> targets(plan.kept.size());
  for (size_t j = 0; j < plan.kept.size(); ++j)
    targets[j] = (j + 1 < plan.kept.size()) ? plan.kept[j + 1] : plan.n;
  return targets;
}

int first_kept_or_sentinel(const MaskPlan& plan) {
  return plan.kept.empty() ? plan.n : plan.kept[0];
}

std::vector<uint8_t> gclm_mask(int n, int i, const std::vector<int>& past_subset,
                               int f) {
  if (n <= 0) throw ArgumentError("gclm_mask: n must be positive");
  if (i < 0 || i >= n)
    throw ArgumentError("gclm_mask: query position " + std::to_string(i) +
                        " outside [0, " + std::to_string(n) + ")");
  if (f <= i || f >= n)
    throw ArgumentError("gclm_mask: target " + std::to_string(f) +
                        " must lie strictly after the query position " +
                        std::to_string(i) + " and inside the sequence");
  std::vector<uint8_t> v(n, 0);
  v[i] = 1;
  v[f] = 1;
  for (int p : past_subset) {
    if (p < 0 || p >= i)
      throw ArgumentError("gclm_mask: past position " + std::to_string(p) +
                          " outside [0, " + std::to_string(i) + ")");
    v[p] = 1;
  }
  return v;
}

}  // namespace mntp
