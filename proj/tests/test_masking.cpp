#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>

#include "mntp/errors.hpp"
#include "mntp/masking.hpp"
#include "mntp/rng.hpp"

using namespace mntp;

namespace {

// Atom-aware two-sided Kolmogorov-Smirnov statistic against the exact CDF.
double ks_statistic(std::vector<double> draws, const MaskSchedule& sched) {
  std::sort(draws.begin(), draws.end());
  double n = static_cast<double>(draws.size());
  double d = 0;
  for (size_t i = 0; i < draws.size(); ++i) {
    d = std::max(d, (i + 1) / n - schedule_cdf(sched, draws[i]));
    d = std::max(d, schedule_cdf_left(sched, draws[i]) - i / n);
  }
  return d;
}

}  // namespace

TEST_CASE("rounding is half away from zero") {
  CHECK(round_half_away(0.5) == 1);
  CHECK(round_half_away(1.5) == 2);
  CHECK(round_half_away(2.5) == 3);
  CHECK(round_half_away(2.4999) == 2);
  CHECK(round_half_away(0.0) == 0);
  CHECK(round_half_away(-0.5) == -1);
}

TEST_CASE("fixed-0.7 always yields exactly 0.7") {
  auto sched = schedule_preset("fixed-0.7");
  Rng rng(1, "ratio");
  for (int i = 0; i < 100; ++i) CHECK(sample_ratio(sched, rng) == 0.7);
}

TEST_CASE("unknown presets and malformed schedules are rejected") {
  CHECK_THROWS_AS(schedule_preset("no-such-preset"), ArgumentError);
  MaskSchedule bad;
  ScheduleComponent c;
  c.kind = ScheduleComponent::Kind::truncnorm;
  c.mean = 0.5;
  c.stddev = 0.1;
  c.lo = 0.8;
  c.hi = 0.6;  // inverted bounds
  bad.components = {c};
  Rng rng(1, "ratio");
  CHECK_THROWS_AS(sample_ratio(bad, rng), ArgumentError);
  MaskSchedule empty;
  CHECK_THROWS_AS(sample_ratio(empty, rng), ArgumentError);
  MaskSchedule badw = schedule_preset("mixture-default");
  badw.components[0].weight = 0.7;  // weights now sum to 1.2
  CHECK_THROWS_AS(sample_ratio(badw, rng), ArgumentError);
}

TEST_CASE("draws respect truncation windows") {
  Rng rng(2, "ratio");
  auto range = schedule_preset("mar-range");
  for (int i = 0; i < 2000; ++i) {
    double v = sample_ratio(range, rng);
    CHECK(v >= 0.7);
    CHECK(v <= 1.0);
  }
  auto shifted = schedule_preset("mar-shifted");
  for (int i = 0; i < 2000; ++i) {
    double v = sample_ratio(shifted, rng);
    CHECK(v >= 0.55);
    CHECK(v <= 0.85);
  }
  auto mix = schedule_preset("mixture-default");
  for (int i = 0; i < 2000; ++i) {
    double v = sample_ratio(mix, rng);
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
  }
}

TEST_CASE("empirical draws match the analytic CDF for every preset") {
  const int n = 100000;
  int preset_idx = 0;
  for (const char* name : {"mixture-default", "mar-range", "mar-shifted",
                           "fixed-0.7", "uniform"}) {
    CAPTURE(name);
    auto sched = schedule_preset(name);
    Rng rng(99, "ratio-ks", preset_idx++);
    std::vector<double> draws(n);
    for (auto& d : draws) d = sample_ratio(sched, rng);
    CHECK(ks_statistic(std::move(draws), sched) < 0.02);
  }
}

TEST_CASE("the CDF itself behaves like a CDF") {
  for (const char* name : {"mixture-default", "mar-range", "uniform"}) {
    auto sched = schedule_preset(name);
    CHECK(schedule_cdf(sched, -0.1) == 0.0);
    CHECK(schedule_cdf(sched, 1.1) == 1.0);
    double prev = -1;
    for (double x = 0; x <= 1.0001; x += 0.01) {
      double v = schedule_cdf(sched, x);
      CHECK(v >= prev);
      prev = v;
    }
  }
  // Atom: left limit and value straddle the jump.
  auto fixed = schedule_preset("fixed-0.7");
  CHECK(schedule_cdf_left(fixed, 0.7) == 0.0);
  CHECK(schedule_cdf(fixed, 0.7) == 1.0);
}

TEST_CASE("mask plans count and place masks correctly") {
  Rng rng(3, "plan");
  auto plan = sample_plan(10, 0.55, rng);
  CHECK(plan.masked_count == 6);  // 5.5 rounds away from zero
  CHECK(plan.kept.size() + plan.masked.size() == 10);
  for (int i : plan.kept) CHECK(plan.keep[i] == 1);
  for (int i : plan.masked) CHECK(plan.keep[i] == 0);
  CHECK(std::is_sorted(plan.kept.begin(), plan.kept.end()));
  CHECK(std::is_sorted(plan.masked.begin(), plan.masked.end()));

  CHECK(sample_plan(10, 0.25, rng).masked_count == 3);  // 2.5 -> 3
  CHECK(sample_plan(10, 0.05, rng).masked_count == 1);  // 0.5 -> 1
  CHECK_THROWS_AS(sample_plan(10, 1.2, rng), RangeError);
  CHECK_THROWS_AS(sample_plan(0, 0.5, rng), ArgumentError);
}

TEST_CASE("ratio extremes degrade gracefully") {
  Rng rng(4, "plan");
  auto all = sample_plan(8, 0.0, rng);
  CHECK(all.masked_count == 0);
  auto targets = skip_targets(all);
  for (int j = 0; j < 8; ++j) CHECK(targets[j] == (j + 1 < 8 ? j + 1 : 8));
  CHECK(first_kept_or_sentinel(all) == 0);

  auto none = sample_plan(8, 1.0, rng);
  CHECK(none.masked_count == 8);
  CHECK(none.kept.empty());
  CHECK(skip_targets(none).empty());
  CHECK(first_kept_or_sentinel(none) == 8);  // sentinel
}

TEST_CASE("skip targets agree with brute force over all n=6 patterns") {
  for (int bits = 0; bits < 64; ++bits) {
    std::vector<uint8_t> keep(6);
    for (int i = 0; i < 6; ++i) keep[i] = (bits >> i) & 1;
    auto plan = plan_from_keep(keep);
    auto targets = skip_targets(plan);
    REQUIRE(targets.size() == plan.kept.size());
    for (size_t j = 0; j < plan.kept.size(); ++j) {
      // Brute force: scan right of kept[j] for the next visible index.
      int expect = 6;
      for (int s = plan.kept[j] + 1; s < 6; ++s)
        if (keep[s]) {
          expect = s;
          break;
        }
      CHECK(targets[j] == expect);
    }
    int fk = 6;
    for (int s = 0; s < 6; ++s)
      if (keep[s]) {
        fk = s;
        break;
      }
    CHECK(first_kept_or_sentinel(plan) == fk);
  }
}

TEST_CASE("masked subsets are uniform over all 15 pairs at n=6") {
  std::map<std::pair<int, int>, int> counts;
  const int trials = 30000;
  for (int t = 0; t < trials; ++t) {
    Rng rng(5, "plan-dist", t);
    auto plan = sample_plan(6, 1.0 / 3.0, rng);
    REQUIRE(plan.masked_count == 2);
    ++counts[{plan.masked[0], plan.masked[1]}];
  }
  CHECK(counts.size() == 15);
  for (auto& [pair, c] : counts)
    CHECK(std::abs(c - trials / 15) < 250);  // 2000 expected, ~5 sigma slack
}

TEST_CASE("plans are deterministic in (seed, step)") {
  Rng a(6, "mask", 123), b(6, "mask", 123);
  auto pa = sample_plan(32, 0.6, a), pb = sample_plan(32, 0.6, b);
  CHECK(pa.keep == pb.keep);
  Rng c(6, "mask", 124);
  CHECK(sample_plan(32, 0.6, c).keep != pa.keep);
}

TEST_CASE("generalized causal mask worked example") {
  // n=8, query position 3, target 6, past context {0, 2}.
  auto v = gclm_mask(8, 3, {0, 2}, 6);
  std::vector<uint8_t> expect = {1, 0, 1, 1, 0, 0, 1, 0};
  CHECK(v == expect);
}

TEST_CASE("generalized causal mask, exhaustively for n <= 6") {
  for (int n = 2; n <= 6; ++n) {
    for (int i = 0; i < n; ++i) {
      for (int f = i + 1; f < n; ++f) {
        for (int bits = 0; bits < (1 << i); ++bits) {
          std::vector<int> past;
          for (int p = 0; p < i; ++p)
            if ((bits >> p) & 1) past.push_back(p);
          auto v = gclm_mask(n, i, past, f);
          for (int j = 0; j < n; ++j) {
            bool expect = (j == i) || (j == f) ||
                          (j < i && ((bits >> j) & 1));
            CHECK(v[j] == (expect ? 1 : 0));
          }
          int ones = 0;
          for (auto b : v) ones += b;
          CHECK(ones == static_cast<int>(past.size()) + 2);
        }
      }
    }
  }
}

TEST_CASE("generalized causal mask rejects malformed queries") {
  CHECK_THROWS_AS(gclm_mask(8, 3, {}, 3), ArgumentError);   // f == i
  CHECK_THROWS_AS(gclm_mask(8, 3, {}, 2), ArgumentError);   // f < i
  CHECK_THROWS_AS(gclm_mask(8, 3, {}, 8), ArgumentError);   // f outside
  CHECK_THROWS_AS(gclm_mask(8, 3, {3}, 6), ArgumentError);  // past not past
  CHECK_THROWS_AS(gclm_mask(8, 3, {-1}, 6), ArgumentError);
  CHECK_THROWS_AS(gclm_mask(8, 8, {}, 9), ArgumentError);   // i outside
}

TEST_CASE("strategy names round trip") {
  for (const char* name : {"none", "drop", "zero", "gaussian"})
    CHECK(to_string(mask_strategy_from(name)) == name);
  CHECK_THROWS_AS(mask_strategy_from("blur"), ArgumentError);
}
