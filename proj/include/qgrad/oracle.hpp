// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace qgrad::oracle {

struct OracleResult {
  std::vector<double> best_levels;
  double best_mse = 0.0;
  std::size_t evaluations = 0;
  /// Spacing of the uniform refinement grid (0 when no grid was swept).
  double grid_step = 0.0;
};

inline constexpr std::size_t kMaxRoundingInstance = 64;
inline constexpr std::size_t kMaxGridPoints = 1024;

/// Exhaustive search for the interior level of a 3-level random-rounding
/// quantizer with endpoints fixed at the data min and max. Candidates are the
/// distinct data values plus `grid_points` uniformly spaced positions on
/// [min, max]. The objective is the exact expected error
/// sum (v - b_{k-1})(b_k - v) / N.
/// Throws Unsupported when N > 64 or s != 3, std::invalid_argument on empty
/// input or grid_points > 1024.
OracleResult brute_force_rr_levels(std::span<const float> values, int s = 3,
                                   std::size_t grid_points = kMaxGridPoints);

/// Exact 1-D two-cluster search: every split of the sorted values, centers
/// at the conditional means, deterministic error sum (v - c)^2 / N.
/// best_levels = {c_neg, c_pos}; a constant input returns {c, c}.
OracleResult brute_force_binary_det(std::span<const float> values);

/// Expected random-rounding error of an arbitrary sorted level sequence that
/// covers the data; evaluated directly without bracket search shortcuts.
double exact_rounding_mse(std::span<const float> values, std::span<const double> levels);

}  // namespace qgrad::oracle
