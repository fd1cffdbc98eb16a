// Copyright 2026 The bmm-lab Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <numeric>
#include <random>
#include <vector>

namespace bmm {

/// Fixed stream ids. Every consumer of randomness draws from its own stream
/// derived from the master seed, so adding draws in one consumer never shifts
/// the numbers another consumer sees.
enum class Stream : std::uint64_t {
  kDataset = 1,
  kShuffle = 2,
  kBeta = 3,
  kPermutation = 4,
  kModelInit = 5,
};

namespace detail {
constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}
}  // namespace detail

/// Portable random source. Only the engine (mt19937_64) comes from the
/// standard library; the distributions are implemented here because the
/// standard ones are implementation-defined and would break bit-exact
/// reproducibility across toolchains.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  /// Stream `id`, optionally keyed by a sub-index such as the epoch.
  static Rng stream(std::uint64_t master, Stream id, std::uint64_t sub = 0) {
    std::uint64_t s = detail::splitmix64(master);
    s = detail::splitmix64(s ^ static_cast<std::uint64_t>(id));
    s = detail::splitmix64(s ^ sub);
    return Rng(s);
  }

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform on the open interval (0, 1); safe to take logs of.
  double uniform_open() {
    return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform_open(); }

  /// Uniform integer in [0, n) by rejection (no modulo bias).
  std::uint64_t below(std::uint64_t n) {
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                std::numeric_limits<std::uint64_t>::max() % n;
    std::uint64_t x;
    do {
      x = engine_();
    } while (x >= limit);
    return x % n;
  }

  /// Standard normal via Box-Muller; one variate per call.
  double normal() {
    const double u1 = uniform_open();
    const double u2 = uniform_open();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  /// Uniformly random permutation of {0..n-1} (Fisher-Yates).
  std::vector<std::size_t> permutation(std::size_t n) {
    std::vector<std::size_t> p(n);
    std::iota(p.begin(), p.end(), std::size_t{0});
    for (std::size_t i = n; i > 1; --i) {
      const auto j = static_cast<std::size_t>(below(i));
      std::swap(p[i - 1], p[j]);
    }
    return p;
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace bmm
