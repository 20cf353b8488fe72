// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "qgrad/quantize.hpp"
#include "qgrad/scheme.hpp"

namespace qgrad {

// Wire layout, all fields little-endian:
//
//   offset 0   u8   format version (kWireVersion)
//          1   u8   scheme id (Scheme)
//          2   u16  nominal level count s (0 for full precision)
//          4   u32  bucket size d
//          8   u64  total element count D
//   then, for quantized schemes, per bucket in order:
//          s x f32  level table, ascending; a bucket with fewer distinct
//                   levels repeats its last level to fill the table
//          ceil(len / m) x u64  indices as base-s digits, m per word,
//                   digit j of a word is index j (word = sum idx_j * s^j)
//   or, for full precision:
//          D x f64  values
//
// m is the largest m with s^m <= 2^64.

inline constexpr std::uint8_t kWireVersion = 1;
inline constexpr std::size_t kHeaderBytes = 16;

struct WireHeader {
  std::uint8_t version = kWireVersion;
  Scheme scheme = Scheme::kOrq;
  std::uint16_t levels = 0;
  std::uint32_t bucket_size = 0;
  std::uint64_t elements = 0;
};

struct WireMessage {
  std::vector<std::uint8_t> bytes;

  std::uint64_t payload_bits() const noexcept { return 8ULL * bytes.size(); }
};

struct RatioReport {
  double achieved_ratio = 0.0;     // 32 D / payload_bits
  double theoretical_ratio = 0.0;  // 32 / log2(s)
  double bits_per_element = 0.0;
};

/// Base-s symbols per 64-bit word.
int symbols_per_word(std::uint32_t s);

/// Encodes quantized buckets that tile a gradient with bucket size d. All
/// buckets must share the scheme and nominal s; throws std::invalid_argument
/// otherwise, or when bucket lengths do not follow the tiling.
/// An empty bucket list encodes as an ORQ header with s = 3 and D = 0.
WireMessage encode(std::span<const QuantizedBucket> buckets, std::uint32_t d);

/// Full-precision message carrying float64 values.
WireMessage encode_dense(std::span<const double> values);

/// Reads and validates the header. Throws FormatError or UnsupportedScheme.
WireHeader read_header(std::span<const std::uint8_t> bytes);

/// Exact inverse of encode. Throws FormatError on truncated or corrupt input
/// and UnsupportedScheme on an unknown scheme id.
std::vector<QuantizedBucket> decode(const WireMessage& msg);

/// Exact inverse of encode_dense.
std::vector<double> decode_dense(const WireMessage& msg);

/// Dequantized values of any message, quantized or dense, as doubles.
std::vector<double> decode_values(const WireMessage& msg);

/// Requires D > 0. Full-precision messages report a theoretical ratio of 1.
RatioReport ratio_report(const WireMessage& msg);

/// Exact message size in bits for the given geometry, without encoding.
std::uint64_t encoded_bits(std::uint32_t s, std::uint32_t d, std::uint64_t total);

}  // namespace qgrad
