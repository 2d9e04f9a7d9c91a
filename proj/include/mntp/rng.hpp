#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <string_view>

#include "mntp/errors.hpp"

namespace mntp {

namespace detail {

// splitmix64 finalizer, used to derive keys and stream ids from seeds/names.
inline uint64_t mix64(uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

inline uint64_t fnv1a64(std::string_view s) {
  uint64_t h = 0xCBF29CE484222325ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001B3ull;
  }
  return h;
}

}  // namespace detail

// Counter-based Philox4x32-10 generator. State is (seed key, stream id,
// draw counter); identical state always reproduces identical draws, so any
// consumer can be re-run or resumed without replaying history. Each draw
// consumes exactly one 4x32 block and advances the counter by one.
class Rng {
 public:
  Rng(uint64_t seed, uint64_t stream_id, uint64_t counter = 0)
      : counter_(counter) {
    uint64_t k = detail::mix64(seed);
    key_ = {static_cast<uint32_t>(k), static_cast<uint32_t>(k >> 32)};
    stream_ = {static_cast<uint32_t>(stream_id),
               static_cast<uint32_t>(stream_id >> 32)};
  }

  // Named stream, optionally keyed by up to two indices (e.g. step, lane).
  // Streams derived from distinct (name, a, b) triples are independent.
  Rng(uint64_t seed, std::string_view name, uint64_t a = 0, uint64_t b = 0)
      : Rng(seed, detail::mix64(detail::mix64(detail::fnv1a64(name) ^
                                              detail::mix64(a)) ^
                                detail::mix64(~b))) {}

  uint64_t counter() const { return counter_; }

  uint32_t next_u32() { return block()[0]; }

  uint64_t next_u64() {
    auto w = block();
    return (static_cast<uint64_t>(w[1]) << 32) | w[0];
  }

  // Uniform in [0, 1) with 53 random bits.
  double uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  // Standard normal via Box-Muller, cosine branch only. One block supplies
  // both uniforms; nothing is cached between calls.
  double gaussian() {
    auto w = block();
    uint64_t ua = (static_cast<uint64_t>(w[1]) << 32) | w[0];
    uint64_t ub = (static_cast<uint64_t>(w[3]) << 32) | w[2];
    double u1 = static_cast<double>((ua >> 11) + 1) * 0x1.0p-53;  // (0, 1]
    double u2 = static_cast<double>(ub >> 11) * 0x1.0p-53;        // [0, 1)
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  }

  // Uniform integer in [0, n).
  uint64_t below(uint64_t n) {
    if (n == 0) throw ArgumentError("Rng::below requires n > 0");
    return next_u64() % n;
  }

 private:
  std::array<uint32_t, 4> block() {
    std::array<uint32_t, 4> c = {static_cast<uint32_t>(counter_),
                                 static_cast<uint32_t>(counter_ >> 32),
                                 stream_[0], stream_[1]};
    ++counter_;
    uint32_t k0 = key_[0], k1 = key_[1];
    for (int round = 0; round < 10; ++round) {
      uint64_t p0 = 0xD2511F53ull * c[0];
      uint64_t p1 = 0xCD9E8D57ull * c[2];
      uint32_t hi0 = static_cast<uint32_t>(p0 >> 32);
      uint32_t lo0 = static_cast<uint32_t>(p0);
      uint32_t hi1 = static_cast<uint32_t>(p1 >> 32);
      uint32_t lo1 = static_cast<uint32_t>(p1);
      c = {hi1 ^ c[1] ^ k0, lo1, hi0 ^ c[3] ^ k1, lo0};
      k0 += 0x9E3779B9u;
      k1 += 0xBB67AE85u;
    }
    return c;
  }

  std::array<uint32_t, 2> key_;
  std::array<uint32_t, 2> stream_;
  uint64_t counter_;
};

}  // namespace mntp
