// Copyright 2026 The fedtopo Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <filesystem>
#include <map>
#include <set>

#include "doctest.h"

#include "fedtopo/data.hpp"
#include "fedtopo/error.hpp"
#include "fedtopo/model.hpp"

using namespace fedtopo;

namespace {

// Rows as sortable tuples, for multiset comparisons.
std::multiset<std::vector<double>> rows_of(const Dataset& d, bool with_label = true) {
  std::multiset<std::vector<double>> out;
  for (std::size_t i = 0; i < d.size(); ++i) {
    std::vector<double> r(d.features(i).begin(), d.features(i).end());
    if (with_label) r.push_back(d.label(i));
    out.insert(std::move(r));
  }
  return out;
}

}  // namespace

TEST_CASE("synthetic data is deterministic") {
  const SyntheticSpec spec{SyntheticKind::linear, 100, 2, 2, 3};
  CHECK(generate_synthetic(spec) == generate_synthetic(spec));
  auto other = spec;
  other.seed = 4;
  CHECK_FALSE(generate_synthetic(spec) == generate_synthetic(other));
}

TEST_CASE("blobs are balanced") {
  for (std::uint64_t seed : {0, 1, 99}) {
    const auto d = generate_synthetic({SyntheticKind::blobs, 90, 2, 3, seed});
    std::map<std::uint32_t, int> counts;
    for (auto y : d.labels()) ++counts[y];
    CHECK(counts == std::map<std::uint32_t, int>{{0, 30}, {1, 30}, {2, 30}});
  }
}

TEST_CASE("linear data respects its margin and spans classes") {
  const auto d = generate_synthetic({SyntheticKind::linear, 300, 5, 3, 2});
  CHECK(d.size() == 300);
  CHECK(d.dim() == 5);
  std::set<std::uint32_t> labels(d.labels().begin(), d.labels().end());
  CHECK(labels.size() == 3);
}

TEST_CASE("linear data is learnable by centralized SGD") {
  const auto d = generate_synthetic({SyntheticKind::linear, 500, 20, 2, 1});
  const ModelSpec spec{ModelKind::logreg, 20, {}, 2};
  Hyperparams h;
  h.learning_rate = 0.1;
  h.local_epochs = 30;
  h.seed = 5;
  const auto out = train_local(spec, init_model(spec, 1), d, h);
  CHECK(evaluate_model(spec, out.params, d).accuracy >= 0.95);
}

TEST_CASE("generator rejects unusable specs") {
  CHECK_THROWS_AS(generate_synthetic({SyntheticKind::linear, 0, 2, 2, 0}), Error);
  CHECK_THROWS_AS(generate_synthetic({SyntheticKind::linear, 10, 0, 2, 0}), Error);
  CHECK_THROWS_AS(generate_synthetic({SyntheticKind::blobs, 10, 2, 1, 0}), Error);
}

TEST_CASE("iid partition splits evenly and covers the input") {
  const auto d = generate_synthetic({SyntheticKind::linear, 100, 3, 2, 1});
  const auto parts = partition_dataset(d, {PartitionScheme::iid, 4, 0, 0, 0, 9});
  REQUIRE(parts.size() == 4);
  std::multiset<std::vector<double>> all;
  for (const auto& p : parts) {
    CHECK(p.size() == 25);
    auto r = rows_of(p);
    all.insert(r.begin(), r.end());
  }
  CHECK(all == rows_of(d));
  CHECK(parts == partition_dataset(d, {PartitionScheme::iid, 4, 0, 0, 0, 9}));
}

TEST_CASE("dirichlet with huge alpha matches the global class ratio") {
  const auto d = generate_synthetic({SyntheticKind::blobs, 2000, 2, 2, 4});
  const auto parts = partition_dataset(d, {PartitionScheme::dirichlet, 4, 1e6, 0, 0, 17});
  REQUIRE(parts.size() == 4);
  std::size_t total = 0;
  for (const auto& p : parts) {
    const double ones = static_cast<double>(std::count(p.labels().begin(), p.labels().end(), 1u));
    CHECK(std::abs(ones / static_cast<double>(p.size()) - 0.5) <= 0.05);
    total += p.size();
  }
  CHECK(total == d.size());
}

TEST_CASE("dirichlet with small alpha is skewed but non-empty") {
  const auto d = generate_synthetic({SyntheticKind::blobs, 400, 2, 4, 4});
  const auto parts = partition_dataset(d, {PartitionScheme::dirichlet, 8, 0.1, 0, 0, 3});
  std::size_t total = 0;
  for (const auto& p : parts) {
    CHECK_FALSE(p.empty());
    total += p.size();
  }
  CHECK(total == d.size());
}

TEST_CASE("label_shard gives each client few labels") {
  const auto d = generate_synthetic({SyntheticKind::blobs, 400, 2, 4, 8});
  const auto parts = partition_dataset(d, {PartitionScheme::label_shard, 4, 0, 2, 0, 3});
  std::size_t total = 0;
  for (const auto& p : parts) {
    std::set<std::uint32_t> labels(p.labels().begin(), p.labels().end());
    CHECK(labels.size() <= 2);
    total += p.size();
  }
  CHECK(total == d.size());
}

TEST_CASE("cluster_flip complements labels of group 1") {
  const auto d = generate_synthetic({SyntheticKind::linear, 400, 4, 2, 5});
  const auto parts = partition_dataset(d, {PartitionScheme::cluster_flip, 4, 0, 0, 2, 6});
  REQUIRE(parts.size() == 4);
  CHECK(cluster_flip_group(0, 4, 2) == 0);
  CHECK(cluster_flip_group(1, 4, 2) == 0);
  CHECK(cluster_flip_group(2, 4, 2) == 1);
  CHECK(cluster_flip_group(3, 4, 2) == 1);

  // Every partition row comes from the input; group 1 rows carry 1 - y.
  std::map<std::vector<double>, std::uint32_t> truth;
  for (std::size_t i = 0; i < d.size(); ++i) truth[{d.features(i).begin(), d.features(i).end()}] = d.label(i);
  std::size_t total = 0;
  for (std::size_t c = 0; c < 4; ++c) {
    const auto& p = parts[c];
    total += p.size();
    for (std::size_t i = 0; i < p.size(); ++i) {
      const auto it = truth.find({p.features(i).begin(), p.features(i).end()});
      REQUIRE(it != truth.end());
      const std::uint32_t expect = cluster_flip_group(c, 4, 2) == 1 ? 1 - it->second : it->second;
      CHECK(p.label(i) == expect);
    }
  }
  CHECK(total == d.size());
}

TEST_CASE("partition errors") {
  const auto d = generate_synthetic({SyntheticKind::linear, 3, 2, 2, 1});
  CHECK_THROWS_AS(partition_dataset(d, {PartitionScheme::iid, 4, 0, 0, 0, 0}), Error);
  CHECK_FALSE(validate_partition_spec({PartitionScheme::dirichlet, 4, 0.0, 0, 0, 0}).empty());
  CHECK_FALSE(validate_partition_spec({PartitionScheme::cluster_flip, 4, 0, 0, 0, 0}).empty());
  CHECK(validate_partition_spec({PartitionScheme::iid, 4, 0, 0, 0, 0}).empty());
}

TEST_CASE("train/test split holds out a fifth") {
  const auto d = generate_synthetic({SyntheticKind::linear, 53, 2, 2, 1});
  const auto s = split_train_test(d, 12);
  CHECK(s.test.size() == 10);
  CHECK(s.train.size() == 43);
  auto all = rows_of(s.train);
  auto t = rows_of(s.test);
  all.insert(t.begin(), t.end());
  CHECK(all == rows_of(d));
  const auto again = split_train_test(d, 12);
  CHECK(again.train == s.train);
  CHECK(again.test == s.test);
}

TEST_CASE("csv round trip") {
  const auto d = generate_synthetic({SyntheticKind::blobs, 12, 3, 3, 1});
  const auto path = std::filesystem::temp_directory_path() / "fedtopo_test_data.csv";
  write_csv(d, path);
  const auto back = read_csv(path, 3);
  std::filesystem::remove(path);
  REQUIRE(back.size() == d.size());
  for (std::size_t i = 0; i < d.size(); ++i) {
    CHECK(back.label(i) == d.label(i));
    for (std::size_t j = 0; j < 3; ++j) CHECK(back.features(i)[j] == d.features(i)[j]);
  }
}
