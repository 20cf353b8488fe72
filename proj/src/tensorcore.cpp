// SPDX-License-Identifier: Apache-2.0
#include "qgrad/tensorcore.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace qgrad {

GradientBuffer::GradientBuffer(std::vector<float> values) : values_(std::move(values)) {
  for (std::size_t i = 0; i < values_.size(); ++i) {
    if (!std::isfinite(values_[i])) {
      throw std::invalid_argument("GradientBuffer: non-finite element at index " +
                                  std::to_string(i));
    }
  }
}

GradientBuffer GradientBuffer::from_doubles(std::span<const double> values) {
  std::vector<float> narrowed(values.size());
  std::transform(values.begin(), values.end(), narrowed.begin(),
                 [](double v) { return static_cast<float>(v); });
  return GradientBuffer(std::move(narrowed));
}

std::size_t bucket_count(std::size_t total, std::size_t d) {
  if (d == 0) throw std::invalid_argument("bucket size must be >= 1");
  return (total + d - 1) / d;
}

std::size_t bucket_length(std::size_t total, std::size_t d, std::size_t index) {
  const std::size_t offset = index * d;
  return std::min(d, total - offset);
}

std::vector<BucketView> bucketize(const GradientBuffer& buffer, std::size_t d) {
  const std::size_t n = bucket_count(buffer.size(), d);
  std::vector<BucketView> views;
  views.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    views.push_back({&buffer, i * d, bucket_length(buffer.size(), d, i)});
  }
  return views;
}

BucketStats stats(std::span<const float> values) {
  if (values.empty()) throw std::invalid_argument("stats: empty bucket");
  BucketStats s;
  s.count = values.size();
  s.min = values[0];
  s.max = values[0];
  double sum = 0.0;
  double l1 = 0.0;
  for (float f : values) {
    const double v = f;
    s.min = std::min(s.min, v);
    s.max = std::max(s.max, v);
    sum += v;
    l1 += std::abs(v);
  }
  s.mean = sum / static_cast<double>(s.count);
  // Rounding can push the mean of a near-constant bucket just outside [min, max].
  s.mean = std::clamp(s.mean, s.min, s.max);
  double sq = 0.0;
  for (float f : values) {
    const double dv = static_cast<double>(f) - s.mean;
    sq += dv * dv;
  }
  s.std = std::sqrt(sq / static_cast<double>(s.count));
  s.l1_norm = l1;
  return s;
}

std::vector<float> clip(std::span<const float> values, double c) {
  if (!(c > 0.0)) throw std::invalid_argument("clip factor must be positive");
  std::vector<float> out(values.size());
  if (values.empty()) return out;
  const double bound = c * stats(values).std;
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double v = values[i];
    const double mag = std::min(std::abs(v), bound);
    out[i] = static_cast<float>(v < 0.0 ? -mag : mag);
  }
  return out;
}

}  // namespace qgrad
