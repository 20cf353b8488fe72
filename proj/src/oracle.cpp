// SPDX-License-Identifier: Apache-2.0
#include "qgrad/oracle.hpp"

#include <algorithm>
#include <limits>
#include <stdexcept>

#include "qgrad/errors.hpp"

namespace qgrad::oracle {

double exact_rounding_mse(std::span<const float> values, std::span<const double> levels) {
  if (values.empty()) return 0.0;
  double acc = 0.0;
  for (float f : values) {
    const double v = f;
    // The tightest bracket [a, b] around v; both sides exist because the
    // levels cover the data.
    double a = -std::numeric_limits<double>::infinity();
    double b = std::numeric_limits<double>::infinity();
    for (double l : levels) {
      if (l <= v) a = std::max(a, l);
      if (l >= v) b = std::min(b, l);
    }
    if (a == -std::numeric_limits<double>::infinity() || b == std::numeric_limits<double>::infinity()) {
      throw std::invalid_argument("exact_rounding_mse: levels do not cover the data");
    }
    acc += (v - a) * (b - v);
  }
  return acc / static_cast<double>(values.size());
}

OracleResult brute_force_rr_levels(std::span<const float> values, int s, std::size_t grid_points) {
  if (s != 3) throw Unsupported("brute_force_rr_levels certifies s = 3 only");
  if (values.size() > kMaxRoundingInstance) {
    throw Unsupported("brute_force_rr_levels: instance larger than 64 elements");
  }
  if (values.empty()) throw std::invalid_argument("brute_force_rr_levels: empty input");
  if (grid_points > kMaxGridPoints) throw std::invalid_argument("brute_force_rr_levels: grid too large");

  const auto [lo_it, hi_it] = std::minmax_element(values.begin(), values.end());
  const double lo = *lo_it;
  const double hi = *hi_it;

  std::vector<double> candidates(values.begin(), values.end());
  OracleResult res;
  if (grid_points >= 2 && hi > lo) {
    res.grid_step = (hi - lo) / static_cast<double>(grid_points - 1);
    for (std::size_t g = 0; g < grid_points; ++g) {
      candidates.push_back(lo + (hi - lo) * static_cast<double>(g) / static_cast<double>(grid_points - 1));
    }
  }
  std::sort(candidates.begin(), candidates.end());
  candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());

  res.best_mse = std::numeric_limits<double>::infinity();
  for (double c : candidates) {
    const double lv[3] = {lo, c, hi};
    const double mse = exact_rounding_mse(values, lv);
    ++res.evaluations;
    if (mse < res.best_mse) {
      res.best_mse = mse;
      res.best_levels = {lo, c, hi};
    }
  }
  return res;
}

OracleResult brute_force_binary_det(std::span<const float> values) {
  if (values.empty()) throw std::invalid_argument("brute_force_binary_det: empty input");
  std::vector<double> v(values.begin(), values.end());
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();

  OracleResult res;
  if (n == 1 || v.front() == v.back()) {
    res.best_levels = {v.front(), v.front()};
    res.best_mse = 0.0;
    res.evaluations = 1;
    return res;
  }

  // Prefix sums of centered values rank the splits in O(N); the winner's
  // error is then recomputed directly.
  double shift = 0.0;
  for (double x : v) shift += x;
  shift /= static_cast<double>(n);
  std::vector<double> p1(n + 1, 0.0);
  std::vector<double> p2(n + 1, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const double c = v[i] - shift;
    p1[i + 1] = p1[i] + c;
    p2[i + 1] = p2[i] + c * c;
  }
  auto sse = [&](std::size_t a, std::size_t b) {
    const double s1 = p1[b] - p1[a];
    const double s2 = p2[b] - p2[a];
    return std::max(0.0, s2 - s1 * s1 / static_cast<double>(b - a));
  };
  std::size_t best_split = 1;
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t split = 1; split < n; ++split) {
    const double e = sse(0, split) + sse(split, n);
    ++res.evaluations;
    if (e < best) {
      best = e;
      best_split = split;
    }
  }

  double sum_l = 0.0;
  double sum_r = 0.0;
  for (std::size_t i = 0; i < best_split; ++i) sum_l += v[i];
  for (std::size_t i = best_split; i < n; ++i) sum_r += v[i];
  const double c_l = sum_l / static_cast<double>(best_split);
  const double c_r = sum_r / static_cast<double>(n - best_split);
  double err = 0.0;
  for (std::size_t i = 0; i < best_split; ++i) err += (v[i] - c_l) * (v[i] - c_l);
  for (std::size_t i = best_split; i < n; ++i) err += (v[i] - c_r) * (v[i] - c_r);
  res.best_mse = err / static_cast<double>(n);
  res.best_levels = {c_l, c_r};
  return res;
}

}  // namespace qgrad::oracle
