// Copyright 2026 The fedtopo Authors
// SPDX-License-Identifier: Apache-2.0

#include "fedtopo/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>
#include <sstream>
#include <string>

#include "fedtopo/error.hpp"
#include "fedtopo/rng.hpp"

namespace fedtopo {

namespace {

std::vector<double> random_unit_vector(Rng& rng, std::size_t dim) {
  std::vector<double> w(dim);
  double norm = 0.0;
  while (norm == 0.0) {
    norm = 0.0;
    for (double& v : w) {
      v = rng.normal();
      norm += v * v;
    }
    norm = std::sqrt(norm);
  }
  for (double& v : w) v /= norm;
  return w;
}

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

Dataset generate_linear(const SyntheticSpec& spec, Rng& rng) {
  Dataset out(spec.input_dim, spec.num_classes, "linear");
  const std::size_t n_dirs = spec.num_classes == 2 ? 1 : spec.num_classes;
  std::vector<std::vector<double>> dirs;
  for (std::size_t k = 0; k < n_dirs; ++k) dirs.push_back(random_unit_vector(rng, spec.input_dim));

  std::vector<double> x(spec.input_dim);
  std::vector<double> scores(n_dirs);
  while (out.size() < spec.num_samples) {
    for (double& v : x) v = rng.normal();
    std::uint32_t label = 0;
    double margin = 0.0;
    if (n_dirs == 1) {
      const double s = dot(x, dirs[0]);
      label = s > 0.0 ? 1 : 0;
      margin = std::abs(s);
    } else {
      for (std::size_t k = 0; k < n_dirs; ++k) scores[k] = dot(x, dirs[k]);
      const auto best = std::max_element(scores.begin(), scores.end());
      label = static_cast<std::uint32_t>(best - scores.begin());
      double runner_up = -INFINITY;
      for (std::size_t k = 0; k < n_dirs; ++k) {
        if (k != label) runner_up = std::max(runner_up, scores[k]);
      }
      margin = *best - runner_up;
    }
    if (margin < kLinearMargin) continue;
    out.push_back(x, label);
  }
  return out;
}

Dataset generate_blobs(const SyntheticSpec& spec, Rng& rng) {
  Dataset out(spec.input_dim, spec.num_classes, "blobs");
  const std::size_t k = spec.num_classes;
  std::vector<std::vector<double>> means(k, std::vector<double>(spec.input_dim, 0.0));
  for (std::size_t c = 0; c < k; ++c) {
    if (spec.input_dim >= 2) {
      const double angle = 2.0 * std::numbers::pi * static_cast<double>(c) / static_cast<double>(k);
      means[c][0] = kBlobScale * std::cos(angle);
      means[c][1] = kBlobScale * std::sin(angle);
    } else {
      means[c][0] = kBlobScale * (static_cast<double>(c) - static_cast<double>(k - 1) / 2.0);
    }
  }
  std::vector<double> x(spec.input_dim);
  for (std::size_t i = 0; i < spec.num_samples; ++i) {
    const std::size_t c = i % k;
    for (std::size_t d = 0; d < spec.input_dim; ++d) x[d] = means[c][d] + kBlobSigma * rng.normal();
    out.push_back(x, static_cast<std::uint32_t>(c));
  }
  return out;
}

std::vector<std::size_t> shuffled_indices(std::size_t n, std::uint64_t seed) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(seed);
  rng.shuffle(std::span<std::size_t>(order));
  return order;
}

// Contiguous near-equal chunks; the first n % parts chunks get one extra.
std::vector<std::vector<std::size_t>> chunk(const std::vector<std::size_t>& items, std::size_t parts) {
  std::vector<std::vector<std::size_t>> out(parts);
  const std::size_t base = items.size() / parts;
  const std::size_t extra = items.size() % parts;
  std::size_t pos = 0;
  for (std::size_t p = 0; p < parts; ++p) {
    const std::size_t len = base + (p < extra ? 1 : 0);
    out[p].assign(items.begin() + static_cast<std::ptrdiff_t>(pos),
                  items.begin() + static_cast<std::ptrdiff_t>(pos + len));
    pos += len;
  }
  return out;
}

std::vector<std::vector<std::size_t>> split_iid(const Dataset& data, const PartitionSpec& spec) {
  return chunk(shuffled_indices(data.size(), mix64(spec.seed, 1)), spec.num_clients);
}

std::vector<std::vector<std::size_t>> split_label_shard(const Dataset& data, const PartitionSpec& spec) {
  const std::size_t num_shards = spec.num_clients * spec.shards_per_client;
  if (data.size() < num_shards) {
    throw Error(Errc::configuration, "label_shard needs at least one sample per shard");
  }
  std::vector<std::size_t> order = shuffled_indices(data.size(), mix64(spec.seed, 2));
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return data.label(a) < data.label(b); });
  const auto shards = chunk(order, num_shards);
  const std::vector<std::size_t> deal = shuffled_indices(num_shards, mix64(spec.seed, 3));

  std::vector<std::vector<std::size_t>> out(spec.num_clients);
  for (std::size_t c = 0; c < spec.num_clients; ++c) {
    for (std::size_t s = 0; s < spec.shards_per_client; ++s) {
      const auto& shard = shards[deal[c * spec.shards_per_client + s]];
      out[c].insert(out[c].end(), shard.begin(), shard.end());
    }
  }
  return out;
}

std::vector<std::vector<std::size_t>> split_dirichlet(const Dataset& data, const PartitionSpec& spec) {
  const std::size_t clients = spec.num_clients;
  std::vector<std::vector<std::size_t>> by_class(data.num_classes());
  for (std::size_t i : shuffled_indices(data.size(), mix64(spec.seed, 4))) {
    by_class[data.label(i)].push_back(i);
  }

  Rng rng(mix64(spec.seed, 5));
  std::vector<std::vector<std::size_t>> out(clients);
  std::vector<double> props(clients);
  for (const auto& members : by_class) {
    double total = 0.0;
    for (double& p : props) {
      p = rng.gamma(spec.alpha);
      total += p;
    }
    const double n_c = static_cast<double>(members.size());
    std::size_t begin = 0;
    double cumulative = 0.0;
    for (std::size_t j = 0; j < clients; ++j) {
      cumulative += props[j] / total;
      std::size_t end = j + 1 == clients
                            ? members.size()
                            : std::min(members.size(), static_cast<std::size_t>(std::floor(cumulative * n_c)));
      end = std::max(end, begin);
      out[j].insert(out[j].end(), members.begin() + static_cast<std::ptrdiff_t>(begin),
                    members.begin() + static_cast<std::ptrdiff_t>(end));
      begin = end;
    }
  }

  // Small alpha can leave clients empty; move single samples from the
  // largest partition (lowest index on ties) until every client has one.
  for (std::size_t j = 0; j < clients; ++j) {
    if (!out[j].empty()) continue;
    std::size_t donor = 0;
    for (std::size_t k = 1; k < clients; ++k) {
      if (out[k].size() > out[donor].size()) donor = k;
    }
    out[j].push_back(out[donor].back());
    out[donor].pop_back();
  }
  return out;
}

}  // namespace

Dataset generate_synthetic(const SyntheticSpec& spec) {
  if (spec.input_dim == 0) throw Error(Errc::configuration, "input_dim must be positive");
  if (spec.num_classes < 2) throw Error(Errc::configuration, "num_classes must be >= 2");
  if (spec.num_samples < spec.num_classes) {
    throw Error(Errc::configuration, "num_samples must be at least num_classes");
  }
  Rng rng(mix64(spec.seed, spec.kind == SyntheticKind::linear ? 11 : 12));
  return spec.kind == SyntheticKind::linear ? generate_linear(spec, rng) : generate_blobs(spec, rng);
}

std::vector<std::string> validate_partition_spec(const PartitionSpec& spec) {
  std::vector<std::string> errors;
  const bool shard = spec.scheme == PartitionScheme::label_shard;
  const bool dir = spec.scheme == PartitionScheme::dirichlet;
  const bool flip = spec.scheme == PartitionScheme::cluster_flip;
  if (spec.num_clients < 1) errors.emplace_back("partition num_clients must be >= 1");
  if (dir && !(spec.alpha > 0.0 && std::isfinite(spec.alpha))) {
    errors.emplace_back("dirichlet partition requires alpha > 0");
  }
  if (!dir && spec.alpha != 0.0) errors.emplace_back("alpha is only valid for the dirichlet scheme");
  if (shard && spec.shards_per_client < 1) {
    errors.emplace_back("label_shard partition requires shards_per_client >= 1");
  }
  if (!shard && spec.shards_per_client != 0) {
    errors.emplace_back("shards_per_client is only valid for the label_shard scheme");
  }
  if (flip && spec.num_clusters < 1) errors.emplace_back("cluster_flip partition requires num_clusters >= 1");
  if (flip && spec.num_clusters > spec.num_clients) {
    errors.emplace_back("cluster_flip needs at least one client per cluster");
  }
  if (!flip && spec.num_clusters != 0) {
    errors.emplace_back("num_clusters is only valid for the cluster_flip scheme");
  }
  return errors;
}

std::size_t cluster_flip_group(std::size_t client_index, std::size_t num_clients,
                               std::size_t num_clusters) {
  return client_index * num_clusters / num_clients;
}

std::vector<Dataset> partition_dataset(const Dataset& data, const PartitionSpec& spec) {
  if (auto errors = validate_partition_spec(spec); !errors.empty()) {
    throw Error(Errc::configuration, errors.front());
  }
  if (data.size() < spec.num_clients) {
    throw Error(Errc::configuration, "more clients than samples");
  }

  std::vector<std::vector<std::size_t>> parts;
  switch (spec.scheme) {
    case PartitionScheme::iid:
    case PartitionScheme::cluster_flip:
      parts = split_iid(data, spec);
      break;
    case PartitionScheme::label_shard:
      parts = split_label_shard(data, spec);
      break;
    case PartitionScheme::dirichlet:
      parts = split_dirichlet(data, spec);
      break;
  }

  std::vector<Dataset> out;
  out.reserve(parts.size());
  for (std::size_t c = 0; c < parts.size(); ++c) {
    Dataset part = data.select(parts[c]);
    if (spec.scheme == PartitionScheme::cluster_flip) {
      const std::size_t g = cluster_flip_group(c, spec.num_clients, spec.num_clusters);
      const std::size_t k = data.num_classes();
      for (std::size_t i = 0; i < part.size(); ++i) {
        part.set_label(i, static_cast<std::uint32_t>((part.label(i) + g) % k));
      }
    }
    out.push_back(std::move(part));
  }
  return out;
}

LocalSplit split_train_test(const Dataset& partition, std::uint64_t seed) {
  std::vector<std::size_t> order = shuffled_indices(partition.size(), seed);
  const std::size_t n_test = partition.size() / 5;
  std::vector<std::size_t> test(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_test));
  std::vector<std::size_t> train(order.begin() + static_cast<std::ptrdiff_t>(n_test), order.end());
  std::sort(test.begin(), test.end());
  std::sort(train.begin(), train.end());
  return {partition.select(train), partition.select(test)};
}

void write_csv(const Dataset& data, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error(Errc::storage, "cannot open " + path.string());
  out << "label";
  for (std::size_t d = 0; d < data.dim(); ++d) out << ",f" << d;
  out << '\n';
  char buf[32];
  for (std::size_t i = 0; i < data.size(); ++i) {
    out << data.label(i);
    for (double v : data.features(i)) {
      auto res = std::to_chars(buf, buf + sizeof buf, v);
      out << ',' << std::string_view(buf, static_cast<std::size_t>(res.ptr - buf));
    }
    out << '\n';
  }
  if (!out) throw Error(Errc::storage, "failed writing " + path.string());
}

Dataset read_csv(const std::filesystem::path& path, std::size_t num_classes) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::not_found, "cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line) || line.rfind("label", 0) != 0) {
    throw Error(Errc::configuration, "missing `label,f0,...` header in " + path.string());
  }
  const std::size_t dim = static_cast<std::size_t>(std::count(line.begin(), line.end(), ','));
  Dataset out(dim, num_classes, "csv:" + path.filename().string());
  std::vector<double> row(dim);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::getline(ss, cell, ',');
    const std::uint32_t label = static_cast<std::uint32_t>(std::stoul(cell));
    for (std::size_t d = 0; d < dim; ++d) {
      if (!std::getline(ss, cell, ',')) throw Error(Errc::configuration, "short csv row");
      auto res = std::from_chars(cell.data(), cell.data() + cell.size(), row[d]);
      if (res.ec != std::errc{}) throw Error(Errc::configuration, "bad number '" + cell + "'");
    }
    out.push_back(row, label);
  }
  return out;
}

}  // namespace fedtopo
