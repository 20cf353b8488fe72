// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "qgrad/levels.hpp"
#include "qgrad/rng.hpp"
#include "qgrad/scheme.hpp"
#include "qgrad/tensorcore.hpp"

namespace qgrad {

/// Per-element level indices for one bucket together with its levels.
struct QuantizedBucket {
  std::vector<std::uint16_t> indices;
  LevelSet levels;
  /// Elements that fell outside [levels.front(), levels.back()] and were
  /// clamped during random rounding.
  std::size_t clamp_events = 0;

  std::size_t size() const noexcept { return indices.size(); }
};

struct RoundingOptions {
  /// Clamp out-of-range elements to the nearest endpoint instead of throwing
  /// OutOfRange.
  bool clamp = true;
};

/// Unbiased random rounding between the two levels bracketing each element.
QuantizedBucket random_round(std::span<const float> values, const LevelSet& levels, RngStream& rng,
                             RoundingOptions options = {});

/// BinGrad-pb: clamp below b_neg and at or above b_pos, random rounding in
/// between.
QuantizedBucket quantize_bingrad_pb(std::span<const float> values, const BinaryLevels& bl,
                                    RngStream& rng);

/// BinGrad-b: deterministic threshold at b_mid.
QuantizedBucket quantize_bingrad_b(std::span<const float> values, const BinaryLevels& bl);

/// (||v||_1 / len) * sign(v) with sign(0) = +1.
QuantizedBucket scaled_signsgd(std::span<const float> values);

std::vector<float> dequantize(const QuantizedBucket& q);

/// Mean of (v - dequantize(q))^2. Throws std::invalid_argument on length
/// mismatch.
double quantization_mse(std::span<const float> original, const QuantizedBucket& q);

/// Exact expectation of the random-rounding error: mean over elements of
/// (v - b_{k-1})(b_k - v) for the bracketing pair, and (v - b)^2 against the
/// nearest endpoint b for elements outside the level range.
double expected_rounding_mse(std::span<const float> values, const LevelSet& levels);

/// Everything needed to quantize one gradient.
struct SchemeConfig {
  Scheme scheme = Scheme::kOrq;
  int s = 3;
  std::size_t bucket_size = 2048;
  std::optional<double> clip;
  RefineOptions refine;
};

/// Throws std::invalid_argument describing the first invalid field.
void validate(const SchemeConfig& cfg);

/// Level count that goes into wire headers: s for multi-level schemes, 3 for
/// TernGrad, 2 for binary schemes, 0 for full precision.
int nominal_levels(const SchemeConfig& cfg);

/// Solves levels for one bucket and quantizes it. Clipping, when configured,
/// is applied to the bucket first.
QuantizedBucket quantize_bucket(std::span<const float> values, const SchemeConfig& cfg,
                                RngStream& rng);

/// Buckets the gradient and quantizes each bucket with its own stream derived
/// from (stream_seed, bucket index).
std::vector<QuantizedBucket> quantize_gradient(const GradientBuffer& gradient,
                                               const SchemeConfig& cfg,
                                               std::uint64_t stream_seed);

/// Dequantizes and concatenates buckets.
std::vector<float> dequantize_all(std::span<const QuantizedBucket> buckets);

}  // namespace qgrad
