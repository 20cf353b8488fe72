// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>
#include <numeric>

#include "qgrad/models.hpp"

using namespace qgrad;

namespace {

ModelOptions options(ModelKind kind) {
  ModelOptions o;
  o.kind = kind;
  o.samples = 200;
  o.features = kind == ModelKind::kQuadratic ? 6 : 4;
  return o;
}

std::vector<double> probe_point(const ToyModel& m, double shift) {
  auto x = m.initial_parameters();
  for (std::size_t j = 0; j < x.size(); ++j) x[j] += shift * std::sin(1.0 + static_cast<double>(j));
  return x;
}

}  // namespace

TEST_CASE("model names parse back") {
  for (auto k : {ModelKind::kQuadratic, ModelKind::kLogistic, ModelKind::kMlp}) {
    CHECK(parse_model(model_name(k)) == k);
  }
  CHECK_THROWS(parse_model("resnet"));
}

TEST_CASE("parameter counts") {
  CHECK(make_model(options(ModelKind::kQuadratic))->dim() == 6);
  CHECK(make_model(options(ModelKind::kLogistic))->dim() == 5);
  CHECK(make_model(options(ModelKind::kMlp))->dim() == 32 * 4 + 65);
}

TEST_CASE("gradients match central finite differences") {
  for (auto kind : {ModelKind::kQuadratic, ModelKind::kLogistic, ModelKind::kMlp}) {
    const auto m = make_model(options(kind));
    const std::vector<std::size_t> batch{0, 3, 3, 17, 42, 199};
    const auto x = probe_point(*m, 0.3);
    std::vector<double> g(m->dim());
    m->gradient(x, batch, g);
    for (std::size_t j = 0; j < m->dim(); ++j) {
      auto xp = x, xm = x;
      const double h = 1e-5;
      xp[j] += h;
      xm[j] -= h;
      const double fd = (m->loss(xp, batch) - m->loss(xm, batch)) / (2 * h);
      INFO(model_name(kind) << " coordinate " << j);
      CHECK(g[j] == doctest::Approx(fd).epsilon(1e-5).scale(1e-6));
    }
  }
}

TEST_CASE("full gradient is the gradient over every sample") {
  const auto m = make_model(options(ModelKind::kLogistic));
  const auto x = probe_point(*m, 0.1);
  std::vector<std::size_t> all(m->samples());
  std::iota(all.begin(), all.end(), 0);
  std::vector<double> g(m->dim());
  m->gradient(x, all, g);
  CHECK(m->full_gradient(x) == g);
  CHECK(m->full_loss(x) == m->loss(x, all));
}

TEST_CASE("quadratic optimum is a stationary point") {
  const auto m = make_model(options(ModelKind::kQuadratic));
  const auto opt = m->optimum();
  REQUIRE(opt.size() == m->dim());
  for (double v : opt) {
    CHECK(v >= 1.0);
    CHECK(v <= 3.0);
  }
  for (double g : m->full_gradient(opt)) CHECK(std::abs(g) < 1e-12);
  CHECK(m->full_loss(opt) < m->full_loss(m->initial_parameters()));
}

TEST_CASE("gradient descent lowers each loss") {
  for (auto kind : {ModelKind::kQuadratic, ModelKind::kLogistic, ModelKind::kMlp}) {
    const auto m = make_model(options(kind));
    auto x = m->initial_parameters();
    const double start = m->full_loss(x);
    for (int it = 0; it < 200; ++it) {
      const auto g = m->full_gradient(x);
      for (std::size_t j = 0; j < x.size(); ++j) x[j] -= 0.1 * g[j];
    }
    INFO(model_name(kind));
    CHECK(m->full_loss(x) < start);
  }
}

TEST_CASE("logistic blobs are separable enough to classify") {
  const auto m = make_model(options(ModelKind::kLogistic));
  auto x = m->initial_parameters();
  for (int it = 0; it < 500; ++it) {
    const auto g = m->full_gradient(x);
    for (std::size_t j = 0; j < x.size(); ++j) x[j] -= 0.5 * g[j];
  }
  CHECK(m->accuracy(x) > 0.9);
  CHECK(std::isnan(make_model(options(ModelKind::kMlp))->accuracy(x)));
}

TEST_CASE("data generation is deterministic in the data seed") {
  const auto a = make_model(options(ModelKind::kMlp));
  const auto b = make_model(options(ModelKind::kMlp));
  const auto x = probe_point(*a, 0.2);
  CHECK(a->full_loss(x) == b->full_loss(x));
  auto o = options(ModelKind::kMlp);
  o.data_seed = 8;
  CHECK(make_model(o)->full_loss(x) != a->full_loss(x));
}

TEST_CASE("model_gradient narrows to float") {
  const auto m = make_model(options(ModelKind::kQuadratic));
  const std::vector<std::size_t> batch{1, 2};
  const auto x = m->initial_parameters();
  const auto g = model_gradient(*m, x, batch);
  std::vector<double> ref(m->dim());
  m->gradient(x, batch, ref);
  REQUIRE(g.size() == ref.size());
  for (std::size_t j = 0; j < ref.size(); ++j) CHECK(g[j] == static_cast<float>(ref[j]));
}
