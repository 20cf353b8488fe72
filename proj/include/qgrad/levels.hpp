// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "qgrad/scheme.hpp"

namespace qgrad {

/// Sorted, duplicate-free quantization levels for one bucket.
///
/// `s` is the nominal level count requested from the solver. Mass
/// concentration can make solved levels coincide; those are merged, so
/// `levels.size()` may be smaller than `s` (a constant bucket yields one
/// level). Levels are stored as 32-bit values so that they survive the
/// wire format unchanged.
struct LevelSet {
  std::vector<float> levels;
  int s = 0;
  Scheme scheme = Scheme::kOrq;

  std::size_t size() const noexcept { return levels.size(); }
  bool degenerate() const noexcept { return levels.size() <= 1; }
  float front() const { return levels.front(); }
  float back() const { return levels.back(); }
};

/// Rounds to float, sorts and merges coincident levels.
LevelSet make_level_set(std::span<const double> raw, int s, Scheme scheme);

/// Two-level quantizer parameters: b_neg = b_{-1}, b_mid = b_0 (threshold,
/// BinGrad-b only), b_pos = b_1.
struct BinaryLevels {
  double b_neg = 0.0;
  double b_mid = 0.0;
  double b_pos = 0.0;
};

/// Residual of the discrete three-level optimality condition for a middle
/// level b placed in [lo, hi]:
///
///   count{v in [lo, hi] : v >= b}  vs  sum_{v in [lo, hi]} (v - lo) / (hi - lo)
///
/// At a data value the left-hand side jumps; elements equal to b may be
/// counted on either side, so the residual is the distance from the
/// right-hand side to [count{v > b}, count{v >= b}]. This is zero exactly
/// where the expected random-rounding error stops decreasing.
struct MidLevelResidual {
  double residual = 0.0;  // distance to the jump interval
  double closed = 0.0;    // |count{v >= b} - rhs|, used as a tie-breaker
};
MidLevelResidual mid_level_residual(double lo, double hi, std::span<const float> sorted, double b);

/// Middle level between lo and hi minimizing the residual above over the
/// distinct values in [lo, hi]. Ties go to the smaller closed residual and
/// then to the smaller value. `sorted` must be ascending; elements outside
/// [lo, hi] are ignored.
/// Throws std::invalid_argument when lo >= hi and DegenerateInterval when no
/// element lies in [lo, hi].
double solve_mid_level(double lo, double hi, std::span<const float> sorted);

/// K such that s = 2^K + 1; throws std::invalid_argument naming the
/// constraint otherwise.
int orq_depth(int s);

/// One midpoint solve of the recursive level search.
struct MidLevelSolve {
  double lo = 0.0;
  double hi = 0.0;
  double level = 0.0;
};

/// ORQ levels with s = 2^K + 1. Endpoints are the data min and max; each
/// midpoint is solved against its bracketing pair, then both halves are
/// refined recursively. `trace`, when given, receives every midpoint solve in
/// recursion order.
LevelSet orq_levels(std::span<const float> values, int depth,
                    std::vector<MidLevelSolve>* trace = nullptr);

struct RefineOptions {
  int max_iter = 0;   // 0: threshold stays at the mean
  double tol = 0.0;   // stop when |delta b_mid| <= tol
};

/// BinGrad-b: threshold at the mean, levels at the conditional means of the
/// two sides. Optional refinement alternates b_mid <- (b_neg + b_pos) / 2 and
/// recomputes the conditional means.
BinaryLevels bingrad_b_levels(std::span<const float> values, RefineOptions refine = {});

/// BinGrad-pb magnitude b_1 >= 0 minimizing |b_1 N - sum_{|v| >= b_1} |v||.
/// Returns b_neg = -b_1, b_mid = 0, b_pos = b_1.
BinaryLevels bingrad_pb_level(std::span<const float> values);
double bingrad_pb_objective(std::span<const float> values, double b1);

/// s evenly spaced levels on [-norm, norm] (QSGD-s, TernGrad with s = 3).
/// norm <= 0 gives the single level {0}.
LevelSet evenly_spaced_levels(double norm, int s, Scheme scheme = Scheme::kQsgd);

/// Nearest-rank empirical quantiles at j / (s - 1), j = 0..s-1.
LevelSet linear_cdf_levels(std::span<const float> values, int s);

}  // namespace qgrad
