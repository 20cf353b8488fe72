// SPDX-License-Identifier: Apache-2.0
#include "qgrad/sim.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <condition_variable>
#include <deque>
#include <exception>
#include <iomanip>
#include <limits>
#include <mutex>
#include <optional>
#include <ostream>
#include <sstream>
#include <thread>

#include "qgrad/errors.hpp"
#include "qgrad/rng.hpp"

namespace qgrad {

double LrSchedule::at(double epoch) const {
  double lr = base;
  for (double e : decay_epochs) {
    if (epoch >= e) lr *= decay_factor;
  }
  if (warmup_epochs > 0.0 && epoch < warmup_epochs) {
    lr *= 0.1 + 0.9 * epoch / warmup_epochs;
  }
  return lr;
}

void validate(const SimConfig& cfg) {
  if (cfg.workers == 0) throw std::invalid_argument("workers must be >= 1");
  if (cfg.steps == 0) throw std::invalid_argument("steps must be >= 1");
  if (!(cfg.lr.base > 0.0)) throw std::invalid_argument("lr must be positive");
  if (!(cfg.lr.decay_factor > 0.0)) throw std::invalid_argument("lr_decay_factor must be positive");
  if (cfg.lr.warmup_epochs < 0.0) throw std::invalid_argument("warmup_epochs must be >= 0");
  if (!(cfg.momentum >= 0.0 && cfg.momentum < 1.0)) throw std::invalid_argument("momentum must be in [0, 1)");
  if (cfg.batch == 0 && cfg.model.samples < cfg.workers) {
    throw std::invalid_argument("full-batch mode needs at least one sample per worker");
  }
  if (cfg.scheme.scheme != Scheme::kFullPrecision) validate(cfg.scheme);
  else if (cfg.scheme.bucket_size == 0) throw std::invalid_argument("bucket size d must be >= 1");
  if (cfg.scheme.clip && !(*cfg.scheme.clip > 0.0)) throw std::invalid_argument("clip factor must be positive");
}

namespace {

enum : std::uint64_t { kSampleTag = 0x5a, kWorkerTag = 0x3b, kServerTag = 0x7c };

std::vector<std::size_t> worker_batch(const SimConfig& cfg, std::size_t n, std::size_t worker,
                                      std::size_t step) {
  std::vector<std::size_t> idx;
  if (cfg.batch == 0) {
    for (std::size_t i = worker; i < n; i += cfg.workers) idx.push_back(i);
    return idx;
  }
  // Aggregate draw for the step; worker l takes the l-th slice. The draw
  // depends only on the aggregate size, so runs with different worker counts
  // but the same aggregate batch see the same samples.
  auto rng = RngStream::derive(cfg.seed, {kSampleTag, step});
  const std::size_t total = cfg.batch * cfg.workers;
  idx.resize(cfg.batch);
  for (std::size_t k = 0; k < total; ++k) {
    const std::size_t i = static_cast<std::size_t>(rng.below(n));
    if (k / cfg.batch == worker) idx[k % cfg.batch] = i;
  }
  return idx;
}

double epoch_of(const SimConfig& cfg, std::size_t step) {
  if (cfg.batch == 0) return static_cast<double>(step);
  return static_cast<double>(step) * static_cast<double>(cfg.batch * cfg.workers) /
         static_cast<double>(cfg.model.samples);
}

WireMessage broadcast_message(const SimConfig& cfg, std::span<const double> avg, std::size_t step) {
  if (!cfg.server_requantize || cfg.scheme.scheme == Scheme::kFullPrecision) {
    return encode_dense(avg);
  }
  const auto buf = GradientBuffer::from_doubles(avg);
  const auto key = RngStream::derive(cfg.seed, {kServerTag, step}).key();
  // Clipping applies to raw worker gradients only; the average of
  // quantized messages is often constant per bucket and would be zeroed.
  auto scheme = cfg.scheme;
  scheme.clip.reset();
  const auto buckets = quantize_gradient(buf, scheme, key);
  return encode(buckets, static_cast<std::uint32_t>(scheme.bucket_size));
}

std::uint64_t digest(std::span<const double> x) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (double v : x) {
    h ^= std::bit_cast<std::uint64_t>(v);
    h *= 0x100000001b3ULL;
  }
  return h;
}

struct Optimizer {
  std::vector<double> x;
  std::vector<double> velocity;

  void apply(std::span<const double> g, double lr, double momentum) {
    if (momentum > 0.0) {
      for (std::size_t j = 0; j < x.size(); ++j) {
        velocity[j] = momentum * velocity[j] + g[j];
        x[j] -= lr * velocity[j];
      }
    } else {
      for (std::size_t j = 0; j < x.size(); ++j) x[j] -= lr * g[j];
    }
  }
};

template <typename T>
class Channel {
 public:
  void push(T v) {
    {
      std::lock_guard lock(mu_);
      q_.push_back(std::move(v));
    }
    cv_.notify_one();
  }
  T pop() {
    std::unique_lock lock(mu_);
    cv_.wait(lock, [&] { return !q_.empty(); });
    T v = std::move(q_.front());
    q_.pop_front();
    return v;
  }

 private:
  std::mutex mu_;
  std::condition_variable cv_;
  std::deque<T> q_;
};

struct Uplink {
  WorkerUpdate update;
  std::uint64_t param_digest = 0;
  std::exception_ptr error;
};

struct Downlink {
  bool stop = false;
  WireMessage message;
  double lr = 0.0;
};

}  // namespace

WorkerUpdate worker_update(const SimConfig& cfg, const ToyModel& model, std::span<const double> x,
                           std::size_t worker, std::size_t step) {
  const auto batch = worker_batch(cfg, model.samples(), worker, step);
  std::vector<double> g(model.dim());
  model.gradient(x, batch, g);
  for (double v : g) {
    if (!std::isfinite(v)) throw SimAbort("non-finite gradient on worker " + std::to_string(worker), step);
  }

  WorkerUpdate up;
  up.worker = worker;
  if (cfg.scheme.scheme == Scheme::kFullPrecision) {
    up.message = encode_dense(g);
    return up;
  }
  const auto buf = GradientBuffer::from_doubles(g);
  const auto key = RngStream::derive(cfg.seed, {kWorkerTag, worker, step}).key();
  const auto buckets = quantize_gradient(buf, cfg.scheme, key);
  double err = 0.0;
  std::size_t j = 0;
  for (const auto& b : buckets) {
    up.clamp_events += b.clamp_events;
    for (auto i : b.indices) {
      const double e = g[j++] - static_cast<double>(b.levels.levels[i]);
      err += e * e;
    }
  }
  up.quant_mse = err / static_cast<double>(g.size());
  up.message = encode(buckets, static_cast<std::uint32_t>(cfg.scheme.bucket_size));
  return up;
}

std::vector<double> server_average(std::span<const WorkerUpdate> updates, std::size_t dim,
                                   std::size_t step) {
  std::vector<const WorkerUpdate*> ordered;
  for (const auto& u : updates) ordered.push_back(&u);
  std::sort(ordered.begin(), ordered.end(),
            [](const WorkerUpdate* a, const WorkerUpdate* b) { return a->worker < b->worker; });
  std::vector<double> avg(dim, 0.0);
  for (const auto* u : ordered) {
    std::vector<double> vals;
    try {
      vals = decode_values(u->message);
    } catch (const std::exception& e) {
      throw SimAbort("decode failed for worker " + std::to_string(u->worker) + ": " + e.what(), step);
    }
    if (vals.size() != dim) {
      throw SimAbort("worker " + std::to_string(u->worker) + " sent " + std::to_string(vals.size()) +
                         " elements, expected " + std::to_string(dim),
                     step);
    }
    for (std::size_t j = 0; j < dim; ++j) avg[j] += vals[j];
  }
  const double inv = static_cast<double>(updates.size());
  for (auto& v : avg) v /= inv;
  return avg;
}

std::vector<double> aggregate_gradient(const SimConfig& cfg, const ToyModel& model,
                                       std::span<const double> x, std::size_t step) {
  std::vector<WorkerUpdate> ups;
  ups.reserve(cfg.workers);
  for (std::size_t l = 0; l < cfg.workers; ++l) ups.push_back(worker_update(cfg, model, x, l, step));
  return server_average(ups, model.dim(), step);
}

SimResult run_sim(const SimConfig& cfg) {
  validate(cfg);
  const auto model = make_model(cfg.model);
  const std::size_t dim = model->dim();
  const std::size_t L = cfg.workers;

  Channel<Uplink> uplink;
  std::vector<Channel<Downlink>> downlinks(L);
  const auto x0 = model->initial_parameters();

  auto worker_main = [&](std::size_t id) {
    Optimizer opt{x0, std::vector<double>(dim, 0.0)};
    std::optional<Downlink> pending;
    for (std::size_t t = 0;; ++t) {
      Uplink msg;
      try {
        if (pending) {
          opt.apply(decode_values(pending->message), pending->lr, cfg.momentum);
          pending.reset();
        }
        msg.update = worker_update(cfg, *model, opt.x, id, t);
        msg.param_digest = digest(opt.x);
      } catch (...) {
        msg.update.worker = id;
        msg.error = std::current_exception();
      }
      uplink.push(std::move(msg));
      Downlink down = downlinks[id].pop();
      if (down.stop) return;
      pending = std::move(down);
    }
  };

  std::vector<std::jthread> threads;
  threads.reserve(L);
  for (std::size_t id = 0; id < L; ++id) threads.emplace_back(worker_main, id);

  auto stop_all = [&] {
    for (auto& d : downlinks) d.push(Downlink{true, {}, 0.0});
  };

  SimResult res;
  res.metrics.reserve(cfg.steps);
  Optimizer server{x0, std::vector<double>(dim, 0.0)};
  try {
    for (std::size_t t = 0; t <= cfg.steps; ++t) {
      std::vector<WorkerUpdate> updates;
      updates.reserve(L);
      std::optional<std::uint64_t> common_digest;
      std::exception_ptr failure;
      for (std::size_t k = 0; k < L; ++k) {
        Uplink up = uplink.pop();
        if (up.error) {
          if (!failure) failure = up.error;
          continue;
        }
        if (common_digest && *common_digest != up.param_digest) {
          if (!failure) {
            failure = std::make_exception_ptr(
                SimAbort("worker parameters diverged on worker " + std::to_string(up.update.worker), t));
          }
        }
        common_digest = up.param_digest;
        updates.push_back(std::move(up.update));
      }
      if (failure) std::rethrow_exception(failure);
      if (common_digest && *common_digest != digest(server.x)) {
        throw SimAbort("worker parameters differ from the server copy", t);
      }
      // The last round only collects the final coherence digests.
      if (t == cfg.steps) break;

      StepMetrics m;
      m.step = t;
      m.lr = cfg.lr.at(epoch_of(cfg, t));
      m.loss = model->full_loss(server.x);
      if (!std::isfinite(m.loss)) throw SimAbort("non-finite training loss", t);
      for (const auto& u : updates) {
        m.quant_mse += u.quant_mse;
        m.bits_per_element += static_cast<double>(u.message.payload_bits()) / static_cast<double>(dim);
        m.clamp_events += u.clamp_events;
      }
      m.quant_mse /= static_cast<double>(L);
      m.bits_per_element /= static_cast<double>(L);

      const auto avg = server_average(updates, dim, t);
      auto down = broadcast_message(cfg, avg, t);
      const auto g = decode_values(down);
      double norm = 0.0;
      for (double v : g) norm += v * v;
      m.grad_norm = std::sqrt(norm);
      server.apply(g, m.lr, cfg.momentum);
      res.metrics.push_back(m);
      for (auto& d : downlinks) d.push(Downlink{false, down, m.lr});
    }
  } catch (...) {
    stop_all();
    throw;
  }
  stop_all();
  threads.clear();

  res.params = server.x;
  res.final_loss = model->full_loss(server.x);
  res.final_accuracy = model->accuracy(server.x);
  if (!std::isfinite(res.final_loss)) throw SimAbort("non-finite training loss", cfg.steps);
  return res;
}

void write_metrics_csv(std::ostream& out, std::span<const StepMetrics> metrics) {
  out << "step,lr,loss,quant_mse,bits_per_element,grad_norm,clamp_events\n";
  std::ostringstream row;
  row << std::setprecision(12);
  for (const auto& m : metrics) {
    row.str("");
    row << m.step << ',' << m.lr << ',' << m.loss << ',' << m.quant_mse << ',' << m.bits_per_element
        << ',' << m.grad_norm << ',' << m.clamp_events << '\n';
    out << row.str();
  }
}

}  // namespace qgrad
