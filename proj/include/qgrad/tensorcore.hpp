// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace qgrad {

/// Flat gradient of 32-bit values. Every element is finite and the length
/// never changes after construction.
class GradientBuffer {
 public:
  GradientBuffer() = default;
  explicit GradientBuffer(std::vector<float> values);
  /// Narrows to float; non-finite inputs are rejected.
  static GradientBuffer from_doubles(std::span<const double> values);

  std::span<const float> values() const noexcept { return values_; }
  std::size_t size() const noexcept { return values_.size(); }
  bool empty() const noexcept { return values_.empty(); }
  float operator[](std::size_t i) const { return values_[i]; }

 private:
  std::vector<float> values_;
};

/// Contiguous slice of a GradientBuffer quantized independently.
struct BucketView {
  const GradientBuffer* parent = nullptr;
  std::size_t offset = 0;
  std::size_t len = 0;

  std::span<const float> values() const {
    return parent->values().subspan(offset, len);
  }
};

struct BucketStats {
  double min = 0.0;
  double max = 0.0;
  double mean = 0.0;
  double std = 0.0;  // population standard deviation
  double l1_norm = 0.0;
  std::size_t count = 0;
};

/// Tiles the buffer into buckets of length d; the last bucket keeps the
/// remainder. Throws std::invalid_argument when d == 0.
std::vector<BucketView> bucketize(const GradientBuffer& buffer, std::size_t d);

/// Number of buckets and the length of bucket i for a D-element gradient.
std::size_t bucket_count(std::size_t total, std::size_t d);
std::size_t bucket_length(std::size_t total, std::size_t d, std::size_t index);

/// Summary statistics accumulated in double precision.
BucketStats stats(std::span<const float> values);
inline BucketStats stats(const BucketView& bucket) { return stats(bucket.values()); }

/// sign(v) * min(|v|, c * sigma) with sigma the population std of the input.
/// A constant input has sigma = 0 and clips to all zeros.
std::vector<float> clip(std::span<const float> values, double c);
inline std::vector<float> clip(const BucketView& bucket, double c) {
  return clip(bucket.values(), c);
}

}  // namespace qgrad
