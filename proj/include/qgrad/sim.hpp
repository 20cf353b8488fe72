// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <stdexcept>
#include <vector>

#include "qgrad/codec.hpp"
#include "qgrad/models.hpp"
#include "qgrad/quantize.hpp"

namespace qgrad {

/// Step size as a function of (fractional) epoch: optional linear warm-up
/// from base/10, then multiplicative decay at each listed epoch.
struct LrSchedule {
  double base = 0.1;
  std::vector<double> decay_epochs;
  double decay_factor = 0.1;
  double warmup_epochs = 0.0;

  double at(double epoch) const;
};

struct SimConfig {
  std::size_t workers = 1;
  std::size_t steps = 100;
  LrSchedule lr;
  SchemeConfig scheme{Scheme::kFullPrecision, 3, 2048, std::nullopt, {}};
  double momentum = 0.0;
  std::uint64_t seed = 1;
  ModelOptions model;
  /// Samples per worker per step, drawn with replacement from a per-step
  /// stream shared by all workers. 0 means full batch: worker l uses the
  /// samples i with i % workers == l.
  std::size_t batch = 32;
  /// Server quantizes the averaged gradient before broadcasting it.
  bool server_requantize = false;
};

/// Throws std::invalid_argument on the first invalid field.
void validate(const SimConfig& cfg);

struct StepMetrics {
  std::size_t step = 0;
  double lr = 0.0;
  double loss = 0.0;            // full-dataset loss before the update
  double quant_mse = 0.0;       // mean over workers of the gradient quantization MSE
  double bits_per_element = 0;  // mean uplink message bits per gradient element
  double grad_norm = 0.0;       // L2 norm of the broadcast average
  std::size_t clamp_events = 0;
};

struct SimResult {
  std::vector<StepMetrics> metrics;
  std::vector<double> params;
  double final_loss = 0.0;
  double final_accuracy = 0.0;  // NaN unless the model classifies
};

/// Raised when a run stops early; step() is the failing step.
class SimAbort : public std::runtime_error {
 public:
  SimAbort(const std::string& what, std::size_t step)
      : std::runtime_error(what + " (step " + std::to_string(step) + ")"), step_(step) {}
  std::size_t step() const noexcept { return step_; }

 private:
  std::size_t step_;
};

/// Synchronous parameter-server training. Every worker runs in its own thread
/// with its own copy of the parameters; gradients travel to the server as
/// encoded wire messages and the averaged gradient comes back the same way.
/// The server checks after every step that all worker parameters are
/// bitwise identical.
SimResult run_sim(const SimConfig& cfg);

/// One worker's uplink for a given step.
struct WorkerUpdate {
  std::size_t worker = 0;
  WireMessage message;
  double quant_mse = 0.0;
  std::size_t clamp_events = 0;
};

/// Computes, quantizes and encodes worker `worker`'s gradient at x for
/// `step`. Deterministic in (cfg.seed, worker, step).
WorkerUpdate worker_update(const SimConfig& cfg, const ToyModel& model, std::span<const double> x,
                           std::size_t worker, std::size_t step);

/// Decodes the uplink messages and averages them in worker order.
std::vector<double> server_average(std::span<const WorkerUpdate> updates, std::size_t dim,
                                   std::size_t step);

/// Full-precision average of L worker updates at a fixed point, without
/// threads; used to study the statistics of the aggregate.
std::vector<double> aggregate_gradient(const SimConfig& cfg, const ToyModel& model,
                                       std::span<const double> x, std::size_t step);

/// Metrics CSV (schema "metrics/1"): header row then one row per step.
void write_metrics_csv(std::ostream& out, std::span<const StepMetrics> metrics);

}  // namespace qgrad
