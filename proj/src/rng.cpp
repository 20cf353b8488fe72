// SPDX-License-Identifier: Apache-2.0
#include "qgrad/rng.hpp"

#include <cmath>
#include <numbers>

namespace qgrad {

RngStream RngStream::derive(std::uint64_t seed, std::initializer_list<std::uint64_t> path) noexcept {
  std::uint64_t h = mix(seed ^ 0x6a09e667f3bcc909ULL);
  for (std::uint64_t id : path) {
    h = mix(h + kGamma + mix(id + 0x3c6ef372fe94f82bULL));
  }
  return RngStream(h);
}

double RngStream::normal() noexcept {
  // 1 - uniform() is in (0, 1], keeping log finite.
  const double u1 = 1.0 - uniform();
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::uint64_t RngStream::below(std::uint64_t n) noexcept {
  // Lemire's multiply-shift with rejection.
  std::uint64_t x = next_u64();
  unsigned __int128 m = static_cast<unsigned __int128>(x) * n;
  std::uint64_t low = static_cast<std::uint64_t>(m);
  if (low < n) {
    const std::uint64_t threshold = -n % n;
    while (low < threshold) {
      x = next_u64();
      m = static_cast<unsigned __int128>(x) * n;
      low = static_cast<std::uint64_t>(m);
    }
  }
  return static_cast<std::uint64_t>(m >> 64);
}

}  // namespace qgrad
