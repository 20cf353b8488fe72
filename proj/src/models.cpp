// SPDX-License-Identifier: Apache-2.0
#include "qgrad/models.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>

#include "qgrad/rng.hpp"

namespace qgrad {

std::string_view model_name(ModelKind kind) {
  switch (kind) {
    case ModelKind::kQuadratic: return "quadratic";
    case ModelKind::kLogistic: return "logistic";
    case ModelKind::kMlp: return "mlp";
  }
  return "unknown";
}

ModelKind parse_model(std::string_view name) {
  if (name == "quadratic") return ModelKind::kQuadratic;
  if (name == "logistic") return ModelKind::kLogistic;
  if (name == "mlp") return ModelKind::kMlp;
  throw std::invalid_argument("unknown model '" + std::string(name) +
                              "' (expected quadratic, logistic, mlp)");
}

std::vector<std::size_t> ToyModel::all_samples() const {
  std::vector<std::size_t> idx(samples());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  return idx;
}

double ToyModel::full_loss(std::span<const double> x) const { return loss(x, all_samples()); }

std::vector<double> ToyModel::full_gradient(std::span<const double> x) const {
  std::vector<double> g(dim());
  gradient(x, all_samples(), g);
  return g;
}

double ToyModel::accuracy(std::span<const double>) const {
  return std::numeric_limits<double>::quiet_NaN();
}

namespace {

// f_i(x) = ||x - a_i||^2 with a_i = x* + e_i and the e_i centered, so the
// full objective is minimized exactly at x*.
class Quadratic final : public ToyModel {
 public:
  explicit Quadratic(const ModelOptions& o) : dim_(o.features), n_(o.samples) {
    RngStream rng = RngStream::derive(o.data_seed, {0x71});
    optimum_.resize(dim_);
    for (auto& v : optimum_) v = 1.0 + 2.0 * rng.uniform();
    targets_.assign(n_ * dim_, 0.0);
    std::vector<double> mean(dim_, 0.0);
    for (std::size_t i = 0; i < n_; ++i) {
      for (std::size_t j = 0; j < dim_; ++j) {
        const double e = o.noise * rng.normal();
        targets_[i * dim_ + j] = e;
        mean[j] += e;
      }
    }
    for (auto& m : mean) m /= static_cast<double>(n_);
    for (std::size_t i = 0; i < n_; ++i) {
      for (std::size_t j = 0; j < dim_; ++j) targets_[i * dim_ + j] += optimum_[j] - mean[j];
    }
  }

  std::size_t dim() const override { return dim_; }
  std::size_t samples() const override { return n_; }
  std::vector<double> initial_parameters() const override { return std::vector<double>(dim_, 0.0); }
  std::vector<double> optimum() const override { return optimum_; }

  double loss(std::span<const double> x, std::span<const std::size_t> batch) const override {
    double acc = 0.0;
    for (auto i : batch) {
      for (std::size_t j = 0; j < dim_; ++j) {
        const double r = x[j] - targets_[i * dim_ + j];
        acc += r * r;
      }
    }
    return acc / static_cast<double>(batch.size());
  }

  void gradient(std::span<const double> x, std::span<const std::size_t> batch,
                std::span<double> out) const override {
    std::fill(out.begin(), out.end(), 0.0);
    for (auto i : batch) {
      for (std::size_t j = 0; j < dim_; ++j) out[j] += 2.0 * (x[j] - targets_[i * dim_ + j]);
    }
    for (auto& g : out) g /= static_cast<double>(batch.size());
  }

 private:
  std::size_t dim_;
  std::size_t n_;
  std::vector<double> optimum_;
  std::vector<double> targets_;
};

// Binary logistic regression on two Gaussian blobs with a small L2 penalty
// on the weights. Parameters are [w (features), bias].
class Logistic final : public ToyModel {
 public:
  static constexpr double kL2 = 1e-3;

  explicit Logistic(const ModelOptions& o) : p_(o.features), n_(o.samples) {
    RngStream rng = RngStream::derive(o.data_seed, {0x10});
    std::vector<double> dir(p_);
    double norm = 0.0;
    for (auto& d : dir) {
      d = rng.normal();
      norm += d * d;
    }
    norm = std::sqrt(norm);
    for (auto& d : dir) d /= norm;
    features_.resize(n_ * p_);
    labels_.resize(n_);
    for (std::size_t i = 0; i < n_; ++i) {
      const double y = (i % 2 == 0) ? 1.0 : 0.0;
      const double offset = (y > 0.5 ? 0.5 : -0.5) * o.separation;
      labels_[i] = y;
      for (std::size_t j = 0; j < p_; ++j) features_[i * p_ + j] = offset * dir[j] + rng.normal();
    }
  }

  std::size_t dim() const override { return p_ + 1; }
  std::size_t samples() const override { return n_; }
  std::vector<double> initial_parameters() const override { return std::vector<double>(p_ + 1, 0.0); }

  double loss(std::span<const double> x, std::span<const std::size_t> batch) const override {
    double acc = 0.0;
    for (auto i : batch) {
      const double z = logit(x, i);
      // log(1 + e^z) - y z, evaluated stably.
      const double softplus = z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
      acc += softplus - labels_[i] * z;
    }
    return acc / static_cast<double>(batch.size()) + 0.5 * kL2 * weight_norm2(x);
  }

  void gradient(std::span<const double> x, std::span<const std::size_t> batch,
                std::span<double> out) const override {
    std::fill(out.begin(), out.end(), 0.0);
    for (auto i : batch) {
      const double r = sigmoid(logit(x, i)) - labels_[i];
      for (std::size_t j = 0; j < p_; ++j) out[j] += r * features_[i * p_ + j];
      out[p_] += r;
    }
    const double inv = 1.0 / static_cast<double>(batch.size());
    for (auto& g : out) g *= inv;
    for (std::size_t j = 0; j < p_; ++j) out[j] += kL2 * x[j];
  }

  double accuracy(std::span<const double> x) const override {
    std::size_t correct = 0;
    for (std::size_t i = 0; i < n_; ++i) {
      const bool pred = logit(x, i) >= 0.0;
      if (pred == (labels_[i] > 0.5)) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(n_);
  }

 private:
  double logit(std::span<const double> x, std::size_t i) const {
    double z = x[p_];
    for (std::size_t j = 0; j < p_; ++j) z += x[j] * features_[i * p_ + j];
    return z;
  }
  static double sigmoid(double z) {
    if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
  }
  double weight_norm2(std::span<const double> x) const {
    double acc = 0.0;
    for (std::size_t j = 0; j < p_; ++j) acc += x[j] * x[j];
    return acc;
  }

  std::size_t p_;
  std::size_t n_;
  std::vector<double> features_;
  std::vector<double> labels_;
};

// One hidden tanh layer, squared loss against a smooth nonlinear target.
// Parameter layout: W1 [hidden x in], b1 [hidden], w2 [hidden], b2.
class Mlp final : public ToyModel {
 public:
  static constexpr std::size_t kHidden = 32;

  explicit Mlp(const ModelOptions& o) : in_(o.features), n_(o.samples), seed_(o.data_seed) {
    RngStream rng = RngStream::derive(o.data_seed, {0x31});
    std::vector<double> a(in_);
    std::vector<double> b(in_);
    for (auto& v : a) v = rng.normal() / std::sqrt(static_cast<double>(in_));
    for (auto& v : b) v = rng.normal() / std::sqrt(static_cast<double>(in_));
    inputs_.resize(n_ * in_);
    targets_.resize(n_);
    for (std::size_t i = 0; i < n_; ++i) {
      double pa = 0.0;
      double pb = 0.0;
      for (std::size_t j = 0; j < in_; ++j) {
        const double v = 2.0 * rng.uniform() - 1.0;
        inputs_[i * in_ + j] = v;
        pa += a[j] * v;
        pb += b[j] * v;
      }
      targets_[i] = std::sin(3.0 * pa) + 0.5 * pb * pb;
    }
  }

  std::size_t dim() const override { return kHidden * in_ + 2 * kHidden + 1; }
  std::size_t samples() const override { return n_; }

  std::vector<double> initial_parameters() const override {
    RngStream rng = RngStream::derive(seed_, {0x32});
    std::vector<double> x(dim(), 0.0);
    const double s1 = 1.0 / std::sqrt(static_cast<double>(in_));
    const double s2 = 1.0 / std::sqrt(static_cast<double>(kHidden));
    for (std::size_t k = 0; k < kHidden * in_; ++k) x[k] = s1 * rng.normal();
    for (std::size_t k = 0; k < kHidden; ++k) x[w2_at() + k] = s2 * rng.normal();
    return x;
  }

  double loss(std::span<const double> x, std::span<const std::size_t> batch) const override {
    double acc = 0.0;
    std::vector<double> h(kHidden);
    for (auto i : batch) {
      const double r = forward(x, i, h) - targets_[i];
      acc += 0.5 * r * r;
    }
    return acc / static_cast<double>(batch.size());
  }

  void gradient(std::span<const double> x, std::span<const std::size_t> batch,
                std::span<double> out) const override {
    std::fill(out.begin(), out.end(), 0.0);
    std::vector<double> h(kHidden);
    for (auto i : batch) {
      const double r = forward(x, i, h) - targets_[i];
      const double* in = &inputs_[i * in_];
      for (std::size_t k = 0; k < kHidden; ++k) {
        out[w2_at() + k] += r * h[k];
        const double dz = r * x[w2_at() + k] * (1.0 - h[k] * h[k]);
        out[b1_at() + k] += dz;
        for (std::size_t j = 0; j < in_; ++j) out[k * in_ + j] += dz * in[j];
      }
      out[b2_at()] += r;
    }
    const double inv = 1.0 / static_cast<double>(batch.size());
    for (auto& g : out) g *= inv;
  }

 private:
  std::size_t b1_at() const { return kHidden * in_; }
  std::size_t w2_at() const { return b1_at() + kHidden; }
  std::size_t b2_at() const { return w2_at() + kHidden; }

  double forward(std::span<const double> x, std::size_t i, std::vector<double>& h) const {
    const double* in = &inputs_[i * in_];
    double y = x[b2_at()];
    for (std::size_t k = 0; k < kHidden; ++k) {
      double z = x[b1_at() + k];
      for (std::size_t j = 0; j < in_; ++j) z += x[k * in_ + j] * in[j];
      h[k] = std::tanh(z);
      y += x[w2_at() + k] * h[k];
    }
    return y;
  }

  std::size_t in_;
  std::size_t n_;
  std::uint64_t seed_;
  std::vector<double> inputs_;
  std::vector<double> targets_;
};

}  // namespace

std::unique_ptr<ToyModel> make_model(const ModelOptions& options) {
  if (options.samples == 0) throw std::invalid_argument("model needs at least one sample");
  if (options.features == 0) throw std::invalid_argument("model needs at least one feature");
  switch (options.kind) {
    case ModelKind::kQuadratic: return std::make_unique<Quadratic>(options);
    case ModelKind::kLogistic: return std::make_unique<Logistic>(options);
    case ModelKind::kMlp: return std::make_unique<Mlp>(options);
  }
  throw std::invalid_argument("unknown model kind");
}

GradientBuffer model_gradient(const ToyModel& model, std::span<const double> x,
                              std::span<const std::size_t> batch) {
  std::vector<double> g(model.dim());
  model.gradient(x, batch, g);
  return GradientBuffer::from_doubles(g);
}

}  // namespace qgrad
