// SPDX-License-Identifier: Apache-2.0
#include "qgrad/synthetic.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "qgrad/rng.hpp"

namespace qgrad {

std::string_view distribution_name(Distribution d) {
  switch (d) {
    case Distribution::kGaussian: return "gaussian";
    case Distribution::kUniform: return "uniform";
    case Distribution::kLaplace: return "laplace";
    case Distribution::kMixture: return "mixture";
    case Distribution::kConstant: return "constant";
  }
  return "unknown";
}

Distribution parse_distribution(std::string_view name) {
  for (auto d : {Distribution::kGaussian, Distribution::kUniform, Distribution::kLaplace,
                 Distribution::kMixture, Distribution::kConstant}) {
    if (name == distribution_name(d)) return d;
  }
  throw std::invalid_argument("unknown distribution '" + std::string(name) +
                              "' (expected gaussian, uniform, laplace, mixture, constant)");
}

std::vector<float> synthetic_gradient(Distribution dist, std::size_t n, std::uint64_t seed,
                                      double scale) {
  auto rng = RngStream::derive(seed, {0xd157, static_cast<std::uint64_t>(dist)});
  std::vector<float> out(n);
  for (auto& v : out) {
    double x = 0.0;
    switch (dist) {
      case Distribution::kGaussian:
        x = scale * rng.normal();
        break;
      case Distribution::kUniform:
        x = scale * std::sqrt(3.0) * (2.0 * rng.uniform() - 1.0);
        break;
      case Distribution::kLaplace: {
        // std of Laplace(b) is b sqrt(2)
        const double b = scale / std::sqrt(2.0);
        const double u = rng.uniform() - 0.5;
        x = -b * std::copysign(1.0, u) * std::log1p(-2.0 * std::abs(u));
        break;
      }
      case Distribution::kMixture: {
        // 0.8 * 0.09 + 0.2 * 4.41 = 0.954, close to unit variance
        const double sd = rng.uniform() < 0.8 ? 0.3 : 2.1;
        x = scale * sd * rng.normal();
        break;
      }
      case Distribution::kConstant:
        x = scale;
        break;
    }
    v = static_cast<float>(x);
  }
  return out;
}

}  // namespace qgrad
