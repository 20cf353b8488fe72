// SPDX-License-Identifier: Apache-2.0
#include "qgrad/levels.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>

#include "qgrad/errors.hpp"

namespace qgrad {
namespace {

std::vector<float> sorted_copy(std::span<const float> values) {
  std::vector<float> v(values.begin(), values.end());
  std::sort(v.begin(), v.end());
  return v;
}

// Elements of an ascending sequence that lie in [lo, hi].
std::span<const float> closed_range(std::span<const float> sorted, double lo, double hi) {
  auto first = std::lower_bound(sorted.begin(), sorted.end(), lo,
                                [](float a, double b) { return static_cast<double>(a) < b; });
  auto last = std::upper_bound(first, sorted.end(), hi,
                               [](double a, float b) { return a < static_cast<double>(b); });
  return {first, last};
}

double rhs_mass(std::span<const float> in_range, double lo, double hi) {
  double acc = 0.0;
  for (float v : in_range) acc += static_cast<double>(v) - lo;
  return acc / (hi - lo);
}

MidLevelResidual residual_from_counts(double rhs, double count_gt, double count_ge) {
  MidLevelResidual r;
  if (rhs < count_gt) {
    r.residual = count_gt - rhs;
  } else if (rhs > count_ge) {
    r.residual = rhs - count_ge;
  }
  r.closed = std::abs(count_ge - rhs);
  return r;
}

bool better(const MidLevelResidual& a, const MidLevelResidual& b) {
  if (a.residual != b.residual) return a.residual < b.residual;
  return a.closed < b.closed;
}

}  // namespace

LevelSet make_level_set(std::span<const double> raw, int s, Scheme scheme) {
  LevelSet out;
  out.s = s;
  out.scheme = scheme;
  out.levels.reserve(raw.size());
  for (double v : raw) out.levels.push_back(static_cast<float>(v));
  std::sort(out.levels.begin(), out.levels.end());
  out.levels.erase(std::unique(out.levels.begin(), out.levels.end()), out.levels.end());
  return out;
}

MidLevelResidual mid_level_residual(double lo, double hi, std::span<const float> sorted, double b) {
  if (!(lo < hi)) throw std::invalid_argument("mid_level_residual: requires lo < hi");
  const auto in = closed_range(sorted, lo, hi);
  const double rhs = rhs_mass(in, lo, hi);
  const auto ge = std::lower_bound(in.begin(), in.end(), b,
                                   [](float a, double x) { return static_cast<double>(a) < x; });
  const auto gt = std::upper_bound(ge, in.end(), b,
                                   [](double x, float a) { return x < static_cast<double>(a); });
  return residual_from_counts(rhs, static_cast<double>(in.end() - gt),
                              static_cast<double>(in.end() - ge));
}

double solve_mid_level(double lo, double hi, std::span<const float> sorted) {
  if (!(lo < hi)) throw std::invalid_argument("solve_mid_level: requires lo < hi");
  const auto in = closed_range(sorted, lo, hi);
  if (in.empty()) throw DegenerateInterval("solve_mid_level: no elements in interval");

  const double rhs = rhs_mass(in, lo, hi);
  const std::size_t n = in.size();
  double best_value = in[0];
  MidLevelResidual best{std::numeric_limits<double>::infinity(),
                        std::numeric_limits<double>::infinity()};
  // Left-hand side only changes at data points, so the distinct values are
  // the whole candidate set. Visiting them in ascending order with a strict
  // comparison keeps the smallest value among ties.
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j < n && in[j] == in[i]) ++j;
    const auto r = residual_from_counts(rhs, static_cast<double>(n - j), static_cast<double>(n - i));
    if (better(r, best)) {
      best = r;
      best_value = in[i];
    }
    i = j;
  }
  return best_value;
}

int orq_depth(int s) {
  for (int k = 1; k <= 15; ++k) {
    if (s == (1 << k) + 1) return k;
  }
  throw std::invalid_argument("ORQ requires s = 2^K + 1 (3, 5, 9, 17, ...); got s = " +
                              std::to_string(s));
}

namespace {

void orq_recurse(std::span<const float> sorted, std::vector<double>& levels, std::size_t l,
                 std::size_t r, std::vector<MidLevelSolve>* trace) {
  const std::size_t m = (l + r) / 2;
  const double lo = levels[l];
  const double hi = levels[r];
  if (lo < hi) {
    try {
      levels[m] = solve_mid_level(lo, hi, sorted);
    } catch (const DegenerateInterval&) {
      levels[m] = lo;
    }
  } else {
    levels[m] = lo;
  }
  if (trace != nullptr) trace->push_back({lo, hi, levels[m]});
  if (r - l > 2) {
    orq_recurse(sorted, levels, l, m, trace);
    orq_recurse(sorted, levels, m, r, trace);
  }
}

}  // namespace

LevelSet orq_levels(std::span<const float> values, int depth, std::vector<MidLevelSolve>* trace) {
  if (values.empty()) throw std::invalid_argument("orq_levels: empty input");
  if (depth < 1 || depth > 15) throw std::invalid_argument("orq_levels: depth must be in [1, 15]");
  const int s = (1 << depth) + 1;
  const auto sorted = sorted_copy(values);
  std::vector<double> levels(static_cast<std::size_t>(s));
  levels.front() = sorted.front();
  levels.back() = sorted.back();
  if (sorted.front() == sorted.back()) {
    const double c = sorted.front();
    return make_level_set(std::span<const double>(&c, 1), s, Scheme::kOrq);
  }
  orq_recurse(sorted, levels, 0, levels.size() - 1, trace);
  return make_level_set(levels, s, Scheme::kOrq);
}

namespace {

struct SideMeans {
  double neg = 0.0;
  double pos = 0.0;
  std::size_t n_neg = 0;
  std::size_t n_pos = 0;
};

SideMeans conditional_means(std::span<const float> values, double threshold) {
  SideMeans m;
  double sum_neg = 0.0;
  double sum_pos = 0.0;
  for (float f : values) {
    const double v = f;
    if (v < threshold) {
      sum_neg += v;
      ++m.n_neg;
    } else {
      sum_pos += v;
      ++m.n_pos;
    }
  }
  if (m.n_neg > 0) m.neg = sum_neg / static_cast<double>(m.n_neg);
  if (m.n_pos > 0) m.pos = sum_pos / static_cast<double>(m.n_pos);
  return m;
}

}  // namespace

BinaryLevels bingrad_b_levels(std::span<const float> values, RefineOptions refine) {
  if (values.empty()) throw std::invalid_argument("bingrad_b_levels: empty input");
  double sum = 0.0;
  for (float v : values) sum += v;
  BinaryLevels bl;
  bl.b_mid = sum / static_cast<double>(values.size());

  auto m = conditional_means(values, bl.b_mid);
  if (m.n_neg == 0 || m.n_pos == 0) {
    bl.b_neg = bl.b_pos = bl.b_mid;
    return bl;
  }
  bl.b_neg = m.neg;
  bl.b_pos = m.pos;

  for (int it = 0; it < refine.max_iter; ++it) {
    const double next_mid = 0.5 * (bl.b_neg + bl.b_pos);
    const auto next = conditional_means(values, next_mid);
    if (next.n_neg == 0 || next.n_pos == 0) break;
    const bool same_split = next.n_neg == m.n_neg;
    const double delta = std::abs(next_mid - bl.b_mid);
    bl.b_mid = next_mid;
    bl.b_neg = next.neg;
    bl.b_pos = next.pos;
    m = next;
    // Counts on each side fix the partition, so an unchanged count means the
    // conditional means are already at their fixed point.
    if (same_split || delta <= refine.tol) break;
  }
  return bl;
}

double bingrad_pb_objective(std::span<const float> values, double b1) {
  double tail = 0.0;
  for (float f : values) {
    const double a = std::abs(static_cast<double>(f));
    if (a >= b1) tail += a;
  }
  return std::abs(b1 * static_cast<double>(values.size()) - tail);
}

BinaryLevels bingrad_pb_level(std::span<const float> values) {
  if (values.empty()) throw std::invalid_argument("bingrad_pb_level: empty input");
  std::vector<double> mags(values.size());
  std::transform(values.begin(), values.end(), mags.begin(),
                 [](float v) { return std::abs(static_cast<double>(v)); });
  std::sort(mags.begin(), mags.end());
  const std::size_t n = mags.size();
  const double dn = static_cast<double>(n);

  // suffix[i] = sum of mags[i..n)
  std::vector<double> suffix(n + 1, 0.0);
  for (std::size_t i = n; i-- > 0;) suffix[i] = suffix[i + 1] + mags[i];

  double best_b = mags.front();
  double best_obj = std::numeric_limits<double>::infinity();
  auto consider = [&](double b, double obj) {
    if (obj < best_obj || (obj == best_obj && b < best_b)) {
      best_obj = obj;
      best_b = b;
    }
  };

  double prev = 0.0;
  bool first_piece = true;
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j < n && mags[j] == mags[i]) ++j;
    const double a = mags[i];
    const double tail = suffix[i];
    // On (prev, a] the tail sum is constant, so b N - tail has one root there.
    const double root = tail / dn;
    const bool root_inside = (first_piece ? root >= prev : root > prev) && root <= a;
    if (root_inside) consider(root, std::abs(root * dn - tail));
    consider(a, std::abs(a * dn - tail));
    prev = a;
    first_piece = false;
    i = j;
  }
  return {-best_b, 0.0, best_b};
}

LevelSet evenly_spaced_levels(double norm, int s, Scheme scheme) {
  if (s < 3 || s % 2 == 0) {
    throw std::invalid_argument("evenly spaced levels need an odd s >= 3; got s = " +
                                std::to_string(s));
  }
  if (!(norm > 0.0)) {
    const double zero = 0.0;
    return make_level_set(std::span<const double>(&zero, 1), s, scheme);
  }
  std::vector<double> raw(static_cast<std::size_t>(s));
  const int half = s - 1;
  for (int j = 0; j < s; ++j) {
    // Integer numerator keeps j = 0, (s-1)/2 and s-1 exact.
    raw[static_cast<std::size_t>(j)] = norm * static_cast<double>(2 * j - half) / half;
  }
  return make_level_set(raw, s, scheme);
}

LevelSet linear_cdf_levels(std::span<const float> values, int s) {
  if (values.empty()) throw std::invalid_argument("linear_cdf_levels: empty input");
  if (s < 3) throw std::invalid_argument("linear_cdf_levels: s must be >= 3");
  const auto sorted = sorted_copy(values);
  const std::size_t n = sorted.size();
  const std::size_t q = static_cast<std::size_t>(s - 1);
  std::vector<double> raw;
  raw.reserve(static_cast<std::size_t>(s));
  for (std::size_t j = 0; j <= q; ++j) {
    std::size_t rank = (j * n + q - 1) / q;  // ceil(j n / (s - 1))
    rank = std::clamp<std::size_t>(rank, 1, n);
    raw.push_back(sorted[rank - 1]);
  }
  return make_level_set(raw, s, Scheme::kLinear);
}

}  // namespace qgrad
