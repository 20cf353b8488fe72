// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace qgrad {

/// Quantization scheme. The numeric value is the wire-format scheme id.
enum class Scheme : std::uint8_t {
  kFullPrecision = 0,
  kOrq = 1,
  kQsgd = 2,
  kTernGrad = 3,
  kLinear = 4,
  kBinGradPb = 5,
  kBinGradB = 6,
  kScaledSign = 7,
};

inline constexpr std::uint8_t kMaxSchemeId = 7;

std::string_view scheme_name(Scheme scheme);
/// Accepts the canonical names plus the aliases "ternary" and "fp32".
/// Throws std::invalid_argument on anything else.
Scheme parse_scheme(std::string_view name);

/// Schemes whose rounding is unbiased in expectation.
bool is_unbiased(Scheme scheme);

}  // namespace qgrad
