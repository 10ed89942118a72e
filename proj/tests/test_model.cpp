// Copyright 2026 The fedtopo Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <numeric>

#include "doctest.h"

#include "fedtopo/error.hpp"
#include "fedtopo/model.hpp"
#include "fedtopo/rng.hpp"

using namespace fedtopo;

namespace {

ModelSpec logreg(std::size_t dim, std::size_t classes) { return {ModelKind::logreg, dim, {}, classes}; }

Dataset separable_2d(std::size_t n, std::uint64_t seed) {
  Dataset d(2, 2);
  Rng rng(seed);
  while (d.size() < n) {
    const double x[2] = {rng.uniform(-1, 1), rng.uniform(-1, 1)};
    if (std::abs(x[0] + x[1]) < 0.1) continue;
    d.push_back(x, x[0] + x[1] > 0 ? 1 : 0);
  }
  return d;
}

// Single-sample loss as a plain function of the parameters.
double sample_loss(const ModelSpec& spec, const ModelParams& p, const Dataset& one) {
  return evaluate_model(spec, p, one).eval_loss;
}

}  // namespace

TEST_CASE("init_model logreg layout and zero biases") {
  const auto p = init_model(logreg(2, 2), 7);
  REQUIRE(p.layers.size() == 2);
  CHECK(p.layers[0].rows == 2);
  CHECK(p.layers[0].cols == 2);
  CHECK(p.layers[1].rows == 1);
  CHECK(p.layers[1].cols == 2);
  for (double b : p.layers[1].values) CHECK(b == 0.0);
  CHECK(p.spec_hash == spec_hash(logreg(2, 2)));
}

TEST_CASE("init_model is deterministic per seed") {
  const ModelSpec spec{ModelKind::mlp, 5, {4, 3}, 3};
  CHECK(init_model(spec, 11) == init_model(spec, 11));
  CHECK(init_model(spec, 11) != init_model(spec, 12));
}

TEST_CASE("mlp layer shapes follow the closed form") {
  const ModelSpec spec{ModelKind::mlp, 4, {3}, 2};
  using S = std::pair<std::size_t, std::size_t>;
  CHECK(layer_shapes(spec) == std::vector<S>{{4, 3}, {1, 3}, {3, 2}, {1, 2}});
  const auto p = init_model(spec, 1);
  REQUIRE(p.layers.size() == 4);
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK(p.layers[i].rows == layer_shapes(spec)[i].first);
    CHECK(p.layers[i].cols == layer_shapes(spec)[i].second);
  }
  CHECK(parameter_count(spec) == 4 * 3 + 3 + 3 * 2 + 2);
  CHECK(p.num_values() == parameter_count(spec));
}

TEST_CASE("input_dim 1 weights are initialized") {
  const auto p = init_model(logreg(1, 3), 5);
  CHECK(std::any_of(p.layers[0].values.begin(), p.layers[0].values.end(), [](double v) { return v != 0.0; }));
}

TEST_CASE("check_spec and check_params reject bad input") {
  CHECK_THROWS_AS(check_spec(ModelSpec{ModelKind::logreg, 0, {}, 2}), Error);
  CHECK_THROWS_AS(check_spec(ModelSpec{ModelKind::logreg, 3, {2}, 2}), Error);
  CHECK_THROWS_AS(check_spec(ModelSpec{ModelKind::mlp, 3, {2, 0}, 2}), Error);
  CHECK_THROWS_AS(check_spec(ModelSpec{ModelKind::logreg, 3, {}, 1}), Error);

  const auto spec = logreg(3, 2);
  auto p = init_model(spec, 1);
  CHECK_NOTHROW(check_params(spec, p));
  auto wrong = p;
  wrong.layers[0].rows = 2;
  wrong.layers[0].values.resize(4);
  try {
    check_params(spec, wrong);
    FAIL("expected shape error");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::shape);
  }
  auto nan = p;
  nan.layers[0].values[0] = std::nan("");
  CHECK_FALSE(all_finite(nan));
  CHECK_THROWS_AS(check_params(spec, nan), Error);
}

TEST_CASE("learning rate 0 leaves params unchanged") {
  const auto spec = ModelSpec{ModelKind::mlp, 2, {3}, 2};
  const auto p = init_model(spec, 3);
  Hyperparams h;
  h.learning_rate = 0.0;
  h.local_epochs = 3;
  const auto out = train_local(spec, p, separable_2d(40, 1), h);
  CHECK(out.params == p);
  CHECK(out.metrics.num_samples == 40);
}

TEST_CASE("one logreg step equals the analytic cross-entropy gradient step") {
  const auto spec = logreg(3, 3);
  auto p = init_model(spec, 9);
  p.layers[1].values = {0.1, -0.2, 0.05};
  Dataset one(3, 3);
  const double x[3] = {0.5, -1.5, 2.0};
  one.push_back(x, 2);
  Hyperparams h;
  h.learning_rate = 0.3;
  h.local_epochs = 1;
  h.batch_size = 10;
  const auto out = train_local(spec, p, one, h);

  // Hand-computed softmax regression step.
  const auto& W = p.layers[0].values;
  const auto& b = p.layers[1].values;
  double z[3];
  for (int k = 0; k < 3; ++k) {
    z[k] = b[k];
    for (int i = 0; i < 3; ++i) z[k] += x[i] * W[i * 3 + k];
  }
  const double zmax = std::max({z[0], z[1], z[2]});
  double e[3];
  double sum = 0.0;
  for (int k = 0; k < 3; ++k) sum += (e[k] = std::exp(z[k] - zmax));
  for (int k = 0; k < 3; ++k) {
    const double g = e[k] / sum - (k == 2 ? 1.0 : 0.0);
    CHECK(out.params.layers[1].values[k] == doctest::Approx(b[k] - 0.3 * g).epsilon(1e-12));
    for (int i = 0; i < 3; ++i) {
      CHECK(out.params.layers[0].values[i * 3 + k] == doctest::Approx(W[i * 3 + k] - 0.3 * x[i] * g).epsilon(1e-12));
    }
  }
}

TEST_CASE("mlp gradient matches central finite differences") {
  const ModelSpec spec{ModelKind::mlp, 3, {4}, 3};
  const auto p = init_model(spec, 21);
  Dataset one(3, 3);
  const double x[3] = {0.3, -0.7, 1.1};
  one.push_back(x, 1);
  Hyperparams h;
  h.learning_rate = 1.0;
  h.batch_size = 1;
  const auto stepped = train_local(spec, p, one, h).params;

  const double eps = 1e-6;
  for (std::size_t l = 0; l < p.layers.size(); ++l) {
    for (std::size_t i = 0; i < p.layers[l].values.size(); ++i) {
      auto plus = p;
      auto minus = p;
      plus.layers[l].values[i] += eps;
      minus.layers[l].values[i] -= eps;
      const double numeric = (sample_loss(spec, plus, one) - sample_loss(spec, minus, one)) / (2 * eps);
      const double analytic = p.layers[l].values[i] - stepped.layers[l].values[i];
      CHECK(analytic == doctest::Approx(numeric).epsilon(1e-6).scale(1.0));
    }
  }
}

TEST_CASE("training on separable data lowers the loss") {
  const auto spec = logreg(2, 2);
  const auto data = separable_2d(200, 4);
  const auto p = init_model(spec, 2);
  const double before = evaluate_model(spec, p, data).eval_loss;
  Hyperparams h;
  h.learning_rate = 0.1;
  h.local_epochs = 50;
  h.seed = 8;
  const auto out = train_local(spec, p, data, h);
  CHECK(out.metrics.train_loss < before);
  CHECK(evaluate_model(spec, out.params, data).accuracy > 0.95);
}

TEST_CASE("consecutive single-epoch calls equal one multi-epoch call") {
  const ModelSpec spec{ModelKind::mlp, 2, {5}, 2};
  const auto data = separable_2d(57, 6);
  const auto p0 = init_model(spec, 4);
  Hyperparams h;
  h.learning_rate = 0.05;
  h.batch_size = 7;
  h.seed = 1234;
  h.local_epochs = 3;
  const auto all = train_local(spec, p0, data, h);
  h.local_epochs = 1;
  auto p = p0;
  TrainOutput step;
  for (std::uint32_t e = 0; e < 3; ++e) {
    step = train_local(spec, p, data, h, e);
    p = step.params;
  }
  CHECK(p == all.params);
  CHECK(step.metrics.train_loss == all.metrics.train_loss);
}

TEST_CASE("evaluate_model accuracy and uniform loss") {
  const auto spec = logreg(2, 2);
  const auto data = separable_2d(20, 3);

  ModelParams perfect = init_model(spec, 1);
  perfect.layers[0].values = {-10, 10, -10, 10};  // logit(1) - logit(0) = 20 (x0 + x1)
  perfect.layers[1].values = {0, 0};
  CHECK(evaluate_model(spec, perfect, data).accuracy == 1.0);

  ModelParams zero = perfect;
  for (auto& t : zero.layers) std::fill(t.values.begin(), t.values.end(), 0.0);
  Dataset balanced(2, 2);
  const double a[2] = {1, 2};
  for (int i = 0; i < 10; ++i) balanced.push_back(a, i % 2);
  CHECK(std::abs(evaluate_model(spec, zero, balanced).eval_loss - std::log(2.0)) <= 1e-12);
}

TEST_CASE("accuracy counts correct predictions") {
  const auto spec = logreg(1, 2);
  ModelParams p = init_model(spec, 1);
  p.layers[0].values = {-1, 1};  // predicts 1 for x > 0
  p.layers[1].values = {0, 0};
  Dataset d(1, 2);
  for (int i = 0; i < 10; ++i) {
    const double x[1] = {i < 5 ? 1.0 : -1.0};
    // 5 positives labelled 1, then 2 negatives labelled 0 and 3 negatives labelled 1.
    d.push_back(x, i < 5 ? 1 : (i < 7 ? 0 : 1));
  }
  const auto m = evaluate_model(spec, p, d);
  CHECK(m.accuracy == doctest::Approx(0.7).epsilon(1e-15));
  CHECK(m.num_samples == 10);
}

TEST_CASE("params_distance") {
  ModelParams a;
  a.layers.push_back(Tensor{1, 2, {3, 4}});
  ModelParams b;
  b.layers.push_back(Tensor{1, 2, {0, 0}});
  CHECK(params_distance(a, a) == 0.0);
  CHECK(params_distance(a, b) == 5.0);

  const ModelSpec spec{ModelKind::mlp, 3, {2}, 2};
  for (std::uint64_t s = 0; s < 20; ++s) {
    const auto x = init_model(spec, s);
    const auto y = init_model(spec, s + 100);
    CHECK(params_distance(x, y) == params_distance(y, x));
  }
}

TEST_CASE("predict_proba sums to one") {
  const ModelSpec spec{ModelKind::mlp, 3, {4}, 5};
  const auto p = init_model(spec, 2);
  const double x[3] = {1, -2, 0.5};
  const auto probs = predict_proba(spec, p, x);
  REQUIRE(probs.size() == 5);
  CHECK(std::accumulate(probs.begin(), probs.end(), 0.0) == doctest::Approx(1.0).epsilon(1e-12));
}
