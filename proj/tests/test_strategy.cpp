// Copyright 2026 The fedtopo Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>

#include "doctest.h"

#include "fedtopo/data.hpp"
#include "fedtopo/error.hpp"
#include "fedtopo/rng.hpp"
#include "fedtopo/strategy.hpp"

using namespace fedtopo;

namespace {

std::vector<ClientHandle> handles(std::size_t n) {
  std::vector<ClientHandle> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back({"c" + std::to_string(10 + i), 0, i, 1});
  return out;
}

ModelParams flat(std::vector<double> v) {
  ModelParams p;
  p.layers.push_back(Tensor{1, v.size(), std::move(v)});
  return p;
}

FitResult result(std::string id, std::vector<double> v, std::uint64_t n, std::uint32_t cluster = 0) {
  FitResult r;
  r.client_id = std::move(id);
  r.params = flat(std::move(v));
  r.num_samples = n;
  r.cluster_id = cluster;
  return r;
}

// Independent weighted mean in long double, summed in the given order.
std::vector<double> oracle_mean(const std::vector<FitResult>& rs) {
  const std::size_t m = rs.front().params.layers[0].values.size();
  std::vector<long double> acc(m, 0.0L);
  long double total = 0.0L;
  for (const auto& r : rs) {
    total += r.num_samples;
    for (std::size_t j = 0; j < m; ++j) acc[j] += static_cast<long double>(r.num_samples) * r.params.layers[0].values[j];
  }
  std::vector<double> out(m);
  for (std::size_t j = 0; j < m; ++j) out[j] = static_cast<double>(acc[j] / total);
  return out;
}

}  // namespace

TEST_CASE("sample_clients sizes and ordering") {
  const auto all = handles(10);
  const auto half = sample_clients(all, 0.5, 3, {}, 1);
  CHECK(half.size() == 5);
  CHECK(std::is_sorted(half.begin(), half.end(),
                       [](const auto& a, const auto& b) { return a.client_id < b.client_id; }));
  CHECK(sample_clients(all, 0.5, 3, {}, 1) == half);

  CHECK(sample_clients(all, 0.1, 3, {}, 1).size() == 3);

  auto shuffled = all;
  std::reverse(shuffled.begin(), shuffled.end());
  const auto full = sample_clients(shuffled, 1.0, 1, {}, 7);
  CHECK(full == all);
}

TEST_CASE("sample_clients blacklist arithmetic") {
  const auto four = handles(4);
  try {
    sample_clients(four, 1.0, 3, {"c10", "c11"}, 1);
    FAIL("expected insufficient clients");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::insufficient_clients);
  }
}

TEST_CASE("sample_clients never returns a blacklisted id") {
  Rng rng(42);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t n = 1 + rng.below(20);
    const auto all = handles(n);
    std::set<std::string> black;
    for (const auto& h : all) {
      if (rng.uniform() < 0.3) black.insert(h.client_id);
    }
    const double fraction = rng.uniform();
    const std::size_t eligible = n - black.size();
    const std::size_t min_n = rng.below(n + 1);
    if (eligible < min_n) {
      CHECK_THROWS_AS(sample_clients(all, fraction, min_n, black, trial), Error);
      continue;
    }
    const auto got = sample_clients(all, fraction, min_n, black, trial);
    const std::size_t want = std::max(min_n, static_cast<std::size_t>(std::ceil(fraction * eligible)));
    CHECK(got.size() == std::min(want, eligible));
    for (const auto& h : got) CHECK(black.count(h.client_id) == 0);
  }
}

TEST_CASE("fedavg weighted example") {
  const std::vector<FitResult> rs{result("a", {1, 3}, 10), result("b", {3, 1}, 30)};
  const auto out = fedavg_aggregate(rs);
  CHECK(out.layers[0].values == std::vector<double>{2.5, 1.5});
}

TEST_CASE("fedavg single result is the identity") {
  const ModelSpec spec{ModelKind::mlp, 3, {4}, 2};
  FitResult r;
  r.client_id = "x";
  r.params = init_model(spec, 3);
  r.num_samples = 17;
  const std::vector<FitResult> one{r};
  CHECK(fedavg_aggregate(one) == r.params);
}

TEST_CASE("fedavg equal weights equals the unweighted mean") {
  Rng rng(5);
  std::vector<FitResult> rs;
  for (int i = 0; i < 5; ++i) {
    std::vector<double> v(6);
    for (auto& x : v) x = rng.normal();
    rs.push_back(result("c" + std::to_string(i), v, 20));
  }
  const auto out = fedavg_aggregate(rs);
  for (std::size_t j = 0; j < 6; ++j) {
    double mean = 0.0;
    for (const auto& r : rs) mean += r.params.layers[0].values[j];
    mean /= 5.0;
    CHECK(std::abs(out.layers[0].values[j] - mean) <= 1e-12);
  }
}

TEST_CASE("fedavg idempotence and permutation invariance") {
  Rng rng(9);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> v(4);
    for (auto& x : v) x = rng.normal() * 10;
    std::vector<FitResult> same;
    for (int k = 0; k < 4; ++k) same.push_back(result("c" + std::to_string(k), v, 1 + rng.below(100)));
    CHECK(fedavg_aggregate(same).layers[0].values == v);

    std::vector<FitResult> rs;
    for (int k = 0; k < 6; ++k) {
      std::vector<double> w(4);
      for (auto& x : w) x = rng.normal();
      rs.push_back(result("c" + std::to_string(k), w, 1 + rng.below(50)));
    }
    const auto base = fedavg_aggregate(rs);
    auto perm = rs;
    std::span<FitResult> s(perm);
    rng.shuffle(s);
    CHECK(fedavg_aggregate(perm) == base);
    const auto want = oracle_mean(rs);
    for (std::size_t j = 0; j < 4; ++j) CHECK(base.layers[0].values[j] == doctest::Approx(want[j]).epsilon(1e-12));
  }
}

TEST_CASE("fedavg errors") {
  CHECK_THROWS_AS(fedavg_aggregate(std::vector<FitResult>{}), Error);
  const std::vector<FitResult> mixed{result("a", {1, 2}, 1), result("b", {1, 2, 3}, 1)};
  try {
    fedavg_aggregate(mixed);
    FAIL("expected shape error");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::shape);
  }
}

TEST_CASE("ifca_assign picks the lowest loss") {
  const ModelSpec spec{ModelKind::logreg, 1, {}, 2};
  Dataset d(1, 2);
  const double x[1] = {1.0};
  d.push_back(x, 1);
  // Logit gap z1 - z0 = w; larger gap means lower loss on label 1.
  auto model = [&](double w) {
    auto p = init_model(spec, 0);
    p.layers[0].values = {0.0, w};
    p.layers[1].values = {0.0, 0.0};
    return p;
  };
  const std::vector<ModelParams> ks{model(-1.0), model(3.0), model(1.0)};
  for (const auto& k : ks) (void)evaluate_model(spec, k, d);
  CHECK(evaluate_model(spec, ks[0], d).eval_loss > evaluate_model(spec, ks[2], d).eval_loss);
  CHECK(ifca_assign(spec, ks, d) == 1);

  const std::vector<ModelParams> same{model(0.5), model(0.5), model(0.5)};
  CHECK(ifca_assign(spec, same, d) == 0);
}

TEST_CASE("ifca_assign recovers cluster_flip groups") {
  const ModelSpec spec{ModelKind::logreg, 4, {}, 2};
  const auto data = generate_synthetic({SyntheticKind::linear, 800, 4, 2, 3});
  const auto parts = partition_dataset(data, {PartitionScheme::cluster_flip, 8, 0, 0, 2, 3});
  // One round of pre-training per group on that group's pooled data.
  std::vector<ModelParams> models;
  Hyperparams h;
  h.learning_rate = 0.1;
  for (std::size_t g = 0; g < 2; ++g) {
    Dataset pooled(4, 2);
    for (std::size_t c = 0; c < 8; ++c) {
      if (cluster_flip_group(c, 8, 2) != g) continue;
      for (std::size_t i = 0; i < parts[c].size(); ++i) pooled.push_back(parts[c].features(i), parts[c].label(i));
    }
    models.push_back(train_local(spec, init_model(spec, 1), pooled, h).params);
  }
  for (std::size_t c = 0; c < 8; ++c) {
    // Brute-force argmin.
    const double l0 = evaluate_model(spec, models[0], parts[c]).eval_loss;
    const double l1 = evaluate_model(spec, models[1], parts[c]).eval_loss;
    const std::size_t want = l1 < l0 ? 1 : 0;
    CHECK(want == cluster_flip_group(c, 8, 2));
    CHECK(ifca_assign(spec, models, parts[c]) == want);
  }
}

TEST_CASE("ifca_aggregate per-cluster rules") {
  const std::vector<ModelParams> ks{flat({0, 0}), flat({5, 5}), flat({9, 9})};
  const std::vector<FitResult> all0{result("a", {1, 3}, 10, 0), result("b", {3, 1}, 30, 0)};
  const auto out = ifca_aggregate(ks, all0);
  REQUIRE(out.size() == 3);
  CHECK(out[0].layers[0].values == std::vector<double>{2.5, 1.5});
  CHECK(out[1] == ks[1]);
  CHECK(out[2] == ks[2]);

  const std::vector<FitResult> split{result("a", {1, 3}, 10, 0), result("b", {3, 1}, 30, 1),
                                     result("c", {2, 2}, 5, 1), result("d", {0, 4}, 7, 0)};
  const auto two = ifca_aggregate(std::vector<ModelParams>{ks[0], ks[1]}, split);
  const std::vector<FitResult> g0{split[0], split[3]};
  const std::vector<FitResult> g1{split[1], split[2]};
  CHECK(two[0] == fedavg_aggregate(g0));
  CHECK(two[1] == fedavg_aggregate(g1));

  const std::vector<FitResult> plain{result("a", {1, 3}, 10), result("b", {3, 1}, 30), result("c", {7, 7}, 3)};
  CHECK(ifca_aggregate(std::vector<ModelParams>{ks[0]}, plain)[0] == fedavg_aggregate(plain));
}

TEST_CASE("aggregate_evaluate") {
  using E = std::pair<std::string, EvalMetrics>;
  const std::vector<E> two{{"a", {0.2, 1.0, 10}}, {"b", {0.6, 0.5, 30}}};
  const auto agg = aggregate_evaluate(two);
  CHECK(agg.global_accuracy == 0.625);
  CHECK(agg.aggregated_eval_loss == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(agg.num_samples == 40);

  const std::vector<E> one{{"a", {0.123, 0.77, 13}}};
  const auto single = aggregate_evaluate(one);
  CHECK(single.aggregated_eval_loss == 0.123);
  CHECK(single.global_accuracy == 0.77);

  Rng rng(3);
  std::vector<E> eq;
  double loss = 0.0;
  double acc = 0.0;
  for (int i = 0; i < 7; ++i) {
    EvalMetrics m{rng.uniform(), rng.uniform(), 12};
    loss += m.eval_loss;
    acc += m.accuracy;
    eq.push_back({"c" + std::to_string(i), m});
  }
  const auto mean = aggregate_evaluate(eq);
  CHECK(std::abs(mean.aggregated_eval_loss - loss / 7) <= 1e-12);
  CHECK(std::abs(mean.global_accuracy - acc / 7) <= 1e-12);

  CHECK_THROWS_AS(aggregate_evaluate(std::vector<E>{}), Error);
}

TEST_CASE("strategy validation") {
  StrategyConfig ok;
  CHECK(validate_strategy(ok).empty());
  StrategyConfig bad;
  bad.fit_fraction = 0.0;
  bad.round_timeout_ms = 0;
  bad.num_clusters = 0;
  CHECK(validate_strategy(bad).size() >= 3);
}
