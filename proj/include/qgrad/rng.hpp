// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <initializer_list>

namespace qgrad {

/// Counter-based random stream: draw i is a pure function of (key, i), so a
/// stream is reproducible from its seed and cheap to split into independent
/// substreams. Not thread-safe; give each concurrent task its own stream.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed) noexcept : key_(mix(seed)) {}

  /// Independent stream for a path of identifiers, e.g. (seed, worker, step, bucket).
  static RngStream derive(std::uint64_t seed, std::initializer_list<std::uint64_t> path) noexcept;

  std::uint64_t next_u64() noexcept { return mix(key_ + kGamma * ++counter_); }
  /// Uniform on [0, 1) with 53 random bits.
  double uniform() noexcept {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }
  /// Standard normal via Box-Muller (one value per two draws).
  double normal() noexcept;
  /// Uniform integer in [0, n); n > 0.
  std::uint64_t below(std::uint64_t n) noexcept;

  std::uint64_t counter() const noexcept { return counter_; }
  std::uint64_t key() const noexcept { return key_; }

  static std::uint64_t mix(std::uint64_t z) noexcept {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

 private:
  static constexpr std::uint64_t kGamma = 0x9e3779b97f4a7c15ULL;
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

}  // namespace qgrad
