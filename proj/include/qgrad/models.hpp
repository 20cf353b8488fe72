// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <string_view>
#include <vector>

#include "qgrad/tensorcore.hpp"

namespace qgrad {

enum class ModelKind { kQuadratic, kLogistic, kMlp };

std::string_view model_name(ModelKind kind);
ModelKind parse_model(std::string_view name);

struct ModelOptions {
  ModelKind kind = ModelKind::kQuadratic;
  std::size_t samples = 1024;
  /// Parameter dimension for the quadratic, feature count for the logistic
  /// and MLP models.
  std::size_t features = 2;
  std::uint64_t data_seed = 7;
  /// Quadratic: std of the per-sample target offsets (centered to zero mean).
  double noise = 0.5;
  /// Logistic: distance between the two blob means, in units of blob std.
  double separation = 4.0;
};

/// Synthetic finite-sum objective f(x) = mean_i f_i(x) with analytic
/// per-sample gradients.
class ToyModel {
 public:
  virtual ~ToyModel() = default;

  virtual std::size_t dim() const = 0;
  virtual std::size_t samples() const = 0;
  virtual std::vector<double> initial_parameters() const = 0;
  /// Mean loss over the listed samples.
  virtual double loss(std::span<const double> x, std::span<const std::size_t> batch) const = 0;
  /// Mean gradient over the listed samples, written to out (size dim()).
  virtual void gradient(std::span<const double> x, std::span<const std::size_t> batch,
                        std::span<double> out) const = 0;

  double full_loss(std::span<const double> x) const;
  std::vector<double> full_gradient(std::span<const double> x) const;
  /// Classification accuracy for the logistic model; NaN for the others.
  virtual double accuracy(std::span<const double> x) const;
  /// Known minimizer, when the model has one in closed form.
  virtual std::vector<double> optimum() const { return {}; }

 protected:
  std::vector<std::size_t> all_samples() const;
};

std::unique_ptr<ToyModel> make_model(const ModelOptions& options);

/// Minibatch gradient narrowed to a GradientBuffer.
GradientBuffer model_gradient(const ToyModel& model, std::span<const double> x,
                              std::span<const std::size_t> batch);

}  // namespace qgrad
