// SPDX-License-Identifier: Apache-2.0
#include "qgrad/scheme.hpp"

#include <stdexcept>

namespace qgrad {

std::string_view scheme_name(Scheme scheme) {
  switch (scheme) {
    case Scheme::kFullPrecision: return "fp";
    case Scheme::kOrq: return "orq";
    case Scheme::kQsgd: return "qsgd";
    case Scheme::kTernGrad: return "terngrad";
    case Scheme::kLinear: return "linear";
    case Scheme::kBinGradPb: return "bingrad-pb";
    case Scheme::kBinGradB: return "bingrad-b";
    case Scheme::kScaledSign: return "signsgd";
  }
  return "unknown";
}

Scheme parse_scheme(std::string_view name) {
  for (std::uint8_t id = 0; id <= kMaxSchemeId; ++id) {
    const auto scheme = static_cast<Scheme>(id);
    if (name == scheme_name(scheme)) return scheme;
  }
  if (name == "fp32") return Scheme::kFullPrecision;
  if (name == "ternary") return Scheme::kTernGrad;
  throw std::invalid_argument("unknown scheme '" + std::string(name) +
                              "' (expected fp, orq, qsgd, terngrad, linear, bingrad-pb, "
                              "bingrad-b, signsgd)");
}

bool is_unbiased(Scheme scheme) {
  switch (scheme) {
    case Scheme::kFullPrecision:
    case Scheme::kOrq:
    case Scheme::kQsgd:
    case Scheme::kTernGrad:
    case Scheme::kLinear:
      return true;
    default:
      return false;
  }
}

}  // namespace qgrad
