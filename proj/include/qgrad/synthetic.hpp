// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <string_view>
#include <vector>

namespace qgrad {

/// Synthetic gradient distributions, all zero-centered with std `scale`
/// except kConstant (every element equals `scale`).
///   kMixture: scale mixture, 80% N(0, (0.3 s)^2) and 20% N(0, (2.1 s)^2),
///   sharply peaked at zero with heavy tails.
enum class Distribution { kGaussian, kUniform, kLaplace, kMixture, kConstant };

std::string_view distribution_name(Distribution d);
Distribution parse_distribution(std::string_view name);

std::vector<float> synthetic_gradient(Distribution dist, std::size_t n, std::uint64_t seed,
                                      double scale = 1e-2);

}  // namespace qgrad
