// Copyright 2026 The fedtopo Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "fedtopo/dataset.hpp"

namespace fedtopo {

enum class SyntheticKind { linear, blobs };

struct SyntheticSpec {
  SyntheticKind kind = SyntheticKind::linear;
  std::size_t num_samples = 0;
  std::size_t input_dim = 0;
  std::size_t num_classes = 2;
  std::uint64_t seed = 0;

  bool operator==(const SyntheticSpec&) const = default;
};

// Minimum distance of a `linear` sample from its decision boundary.
inline constexpr double kLinearMargin = 0.1;
// Per-coordinate standard deviation of `blobs` clusters.
inline constexpr double kBlobSigma = 0.5;
// Distance of each blob mean from the origin.
inline constexpr double kBlobScale = 3.0;

/// `linear`: standard-normal features labelled by a hidden random hyperplane
/// (one-vs-rest argmax over hidden directions when num_classes > 2); samples
/// closer than kLinearMargin to the boundary are redrawn.
/// `blobs`: one isotropic Gaussian per class with means on a regular simplex
/// (unit circle in the first two coordinates scaled by kBlobScale); sample i
/// has label i mod num_classes, so classes are balanced.
Dataset generate_synthetic(const SyntheticSpec& spec);

enum class PartitionScheme { iid, label_shard, dirichlet, cluster_flip };

struct PartitionSpec {
  PartitionScheme scheme = PartitionScheme::iid;
  std::size_t num_clients = 1;
  double alpha = 0.0;                 // dirichlet
  std::size_t shards_per_client = 0;  // label_shard
  std::size_t num_clusters = 0;       // cluster_flip
  std::uint64_t seed = 0;

  bool operator==(const PartitionSpec&) const = default;
};

// Empty when valid; otherwise one message per violation.
std::vector<std::string> validate_partition_spec(const PartitionSpec& spec);

/// Disjoint, covering, non-empty split of `data` into num_clients parts.
/// cluster_flip remaps labels of group g by rotating them by g.
std::vector<Dataset> partition_dataset(const Dataset& data, const PartitionSpec& spec);

// Ground-truth group of a client under cluster_flip (contiguous blocks).
std::size_t cluster_flip_group(std::size_t client_index, std::size_t num_clients,
                               std::size_t num_clusters);

/// Deterministic split of one client's partition into (train, test) with
/// |test| = floor(0.2 * |partition|).
struct LocalSplit {
  Dataset train;
  Dataset test;
};
LocalSplit split_train_test(const Dataset& partition, std::uint64_t seed);

// Debug dump with header `label,f0,f1,...`.
void write_csv(const Dataset& data, const std::filesystem::path& path);
Dataset read_csv(const std::filesystem::path& path, std::size_t num_classes);

}  // namespace fedtopo
