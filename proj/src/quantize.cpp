// SPDX-License-Identifier: Apache-2.0
#include "qgrad/quantize.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "qgrad/errors.hpp"

namespace qgrad {
namespace {

LevelSet binary_level_set(double lo, double hi, Scheme scheme) {
  const double raw[2] = {lo, hi};
  return make_level_set(raw, 2, scheme);
}

// Index of the lower bracketing level for v in [front, back]; the last
// interval is closed on the right.
std::size_t lower_bracket(const std::vector<float>& lv, double v) {
  auto it = std::upper_bound(lv.begin(), lv.end(), v,
                             [](double x, float b) { return x < static_cast<double>(b); });
  std::size_t k = static_cast<std::size_t>(it - lv.begin());
  if (k == 0) return 0;
  return std::min(k - 1, lv.size() - 2);
}

std::uint16_t round_one(const std::vector<float>& lv, double v, RngStream& rng) {
  const std::size_t k = lower_bracket(lv, v);
  const double lo = lv[k];
  const double hi = lv[k + 1];
  const double p_up = (v - lo) / (hi - lo);
  return static_cast<std::uint16_t>(rng.uniform() < p_up ? k + 1 : k);
}

}  // namespace

QuantizedBucket random_round(std::span<const float> values, const LevelSet& levels, RngStream& rng,
                             RoundingOptions options) {
  if (levels.levels.empty()) throw std::invalid_argument("random_round: empty level set");
  QuantizedBucket q;
  q.levels = levels;
  q.indices.resize(values.size());
  const auto& lv = levels.levels;
  const double front = lv.front();
  const double back = lv.back();
  const std::uint16_t last = static_cast<std::uint16_t>(lv.size() - 1);
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double v = values[i];
    if (v < front || v > back) {
      if (!options.clamp) {
        throw OutOfRange("random_round: element " + std::to_string(i) + " = " +
                         std::to_string(v) + " outside level range");
      }
      ++q.clamp_events;
      q.indices[i] = v < front ? 0 : last;
      continue;
    }
    q.indices[i] = lv.size() == 1 ? 0 : round_one(lv, v, rng);
  }
  return q;
}

QuantizedBucket quantize_bingrad_pb(std::span<const float> values, const BinaryLevels& bl,
                                    RngStream& rng) {
  QuantizedBucket q;
  q.levels = binary_level_set(bl.b_neg, bl.b_pos, Scheme::kBinGradPb);
  q.indices.resize(values.size());
  const auto& lv = q.levels.levels;
  if (lv.size() == 1) return q;
  const double lo = lv[0];
  const double hi = lv[1];
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double v = values[i];
    if (v < lo) {
      q.indices[i] = 0;
    } else if (v >= hi) {
      q.indices[i] = 1;
    } else {
      q.indices[i] = rng.uniform() < (v - lo) / (hi - lo) ? 1 : 0;
    }
  }
  return q;
}

QuantizedBucket quantize_bingrad_b(std::span<const float> values, const BinaryLevels& bl) {
  QuantizedBucket q;
  q.levels = binary_level_set(bl.b_neg, bl.b_pos, Scheme::kBinGradB);
  q.indices.resize(values.size());
  if (q.levels.size() == 1) return q;
  for (std::size_t i = 0; i < values.size(); ++i) {
    q.indices[i] = static_cast<double>(values[i]) < bl.b_mid ? 0 : 1;
  }
  return q;
}

QuantizedBucket scaled_signsgd(std::span<const float> values) {
  if (values.empty()) throw std::invalid_argument("scaled_signsgd: empty bucket");
  const double m = stats(values).l1_norm / static_cast<double>(values.size());
  QuantizedBucket q;
  q.levels = binary_level_set(-m, m, Scheme::kScaledSign);
  q.indices.resize(values.size());
  if (q.levels.size() == 1) return q;
  for (std::size_t i = 0; i < values.size(); ++i) q.indices[i] = values[i] < 0.0f ? 0 : 1;
  return q;
}

std::vector<float> dequantize(const QuantizedBucket& q) {
  std::vector<float> out(q.indices.size());
  const auto& lv = q.levels.levels;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = lv[q.indices[i]];
  return out;
}

double quantization_mse(std::span<const float> original, const QuantizedBucket& q) {
  if (original.size() != q.size()) throw std::invalid_argument("quantization_mse: length mismatch");
  if (original.empty()) return 0.0;
  const auto& lv = q.levels.levels;
  double acc = 0.0;
  for (std::size_t i = 0; i < original.size(); ++i) {
    const double e = static_cast<double>(original[i]) - lv[q.indices[i]];
    acc += e * e;
  }
  return acc / static_cast<double>(original.size());
}

double expected_rounding_mse(std::span<const float> values, const LevelSet& levels) {
  if (values.empty()) return 0.0;
  const auto& lv = levels.levels;
  const double front = lv.front();
  const double back = lv.back();
  double acc = 0.0;
  for (float f : values) {
    const double v = f;
    if (v <= front) {
      acc += (v - front) * (v - front);
    } else if (v >= back) {
      acc += (v - back) * (v - back);
    } else {
      const std::size_t k = lower_bracket(lv, v);
      acc += (v - lv[k]) * (static_cast<double>(lv[k + 1]) - v);
    }
  }
  return acc / static_cast<double>(values.size());
}

void validate(const SchemeConfig& cfg) {
  if (cfg.bucket_size == 0) throw std::invalid_argument("bucket size d must be >= 1");
  if (cfg.bucket_size > 0xffffffffULL) throw std::invalid_argument("bucket size d must fit in 32 bits");
  if (cfg.clip && !(*cfg.clip > 0.0)) throw std::invalid_argument("clip factor must be positive");
  if (cfg.refine.max_iter < 0) throw std::invalid_argument("refinement iterations must be >= 0");
  switch (cfg.scheme) {
    case Scheme::kOrq:
      orq_depth(cfg.s);
      break;
    case Scheme::kQsgd:
      if (cfg.s < 3 || cfg.s % 2 == 0 || cfg.s > 65535) {
        throw std::invalid_argument("QSGD requires an odd s >= 3; got s = " + std::to_string(cfg.s));
      }
      break;
    case Scheme::kLinear:
      if (cfg.s < 3 || cfg.s > 65535) {
        throw std::invalid_argument("Linear requires s >= 3; got s = " + std::to_string(cfg.s));
      }
      break;
    default:
      break;
  }
}

int nominal_levels(const SchemeConfig& cfg) {
  switch (cfg.scheme) {
    case Scheme::kFullPrecision: return 0;
    case Scheme::kTernGrad: return 3;
    case Scheme::kBinGradPb:
    case Scheme::kBinGradB:
    case Scheme::kScaledSign: return 2;
    default: return cfg.s;
  }
}

namespace {

double max_abs(std::span<const float> values) {
  double m = 0.0;
  for (float v : values) m = std::max(m, std::abs(static_cast<double>(v)));
  return m;
}

}  // namespace

QuantizedBucket quantize_bucket(std::span<const float> values, const SchemeConfig& cfg,
                                RngStream& rng) {
  if (values.empty()) throw std::invalid_argument("quantize_bucket: empty bucket");
  std::vector<float> clipped;
  if (cfg.clip) {
    clipped = clip(values, *cfg.clip);
    values = clipped;
  }
  switch (cfg.scheme) {
    case Scheme::kOrq:
      return random_round(values, orq_levels(values, orq_depth(cfg.s)), rng);
    case Scheme::kQsgd:
      return random_round(values, evenly_spaced_levels(max_abs(values), cfg.s, Scheme::kQsgd), rng);
    case Scheme::kTernGrad:
      return random_round(values, evenly_spaced_levels(max_abs(values), 3, Scheme::kTernGrad), rng);
    case Scheme::kLinear:
      return random_round(values, linear_cdf_levels(values, cfg.s), rng);
    case Scheme::kBinGradPb:
      return quantize_bingrad_pb(values, bingrad_pb_level(values), rng);
    case Scheme::kBinGradB:
      return quantize_bingrad_b(values, bingrad_b_levels(values, cfg.refine));
    case Scheme::kScaledSign:
      return scaled_signsgd(values);
    case Scheme::kFullPrecision:
      break;
  }
  throw std::invalid_argument("quantize_bucket: scheme '" + std::string(scheme_name(cfg.scheme)) +
                              "' does not quantize");
}

std::vector<QuantizedBucket> quantize_gradient(const GradientBuffer& gradient,
                                               const SchemeConfig& cfg,
                                               std::uint64_t stream_seed) {
  std::vector<QuantizedBucket> out;
  const auto views = bucketize(gradient, cfg.bucket_size);
  out.reserve(views.size());
  for (std::size_t b = 0; b < views.size(); ++b) {
    auto rng = RngStream::derive(stream_seed, {b});
    out.push_back(quantize_bucket(views[b].values(), cfg, rng));
  }
  return out;
}

std::vector<float> dequantize_all(std::span<const QuantizedBucket> buckets) {
  std::vector<float> out;
  for (const auto& q : buckets) {
    const auto part = dequantize(q);
    out.insert(out.end(), part.begin(), part.end());
  }
  return out;
}

}  // namespace qgrad
