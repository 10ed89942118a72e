// Copyright 2026 The fedtopo Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <variant>
#include <vector>

namespace fedtopo {

inline constexpr const char* kCollectorId = "collector";

enum class TopologyKind { centralized, clustered, hierarchical, star_ring };

// "auto:<group_size>" in manifests.
struct AutoRingGroups {
  std::size_t group_size = 0;
  bool operator==(const AutoRingGroups&) const = default;
};
using RingGroups = std::variant<std::vector<std::vector<std::string>>, AutoRingGroups>;

struct TopologySpec {
  TopologyKind kind = TopologyKind::centralized;
  std::size_t num_clients = 0;
  std::optional<std::size_t> num_clusters;         // clustered
  std::optional<std::size_t> num_mid_aggregators;  // hierarchical
  std::optional<std::size_t> local_rounds;         // hierarchical, star_ring
  std::optional<RingGroups> ring_groups;           // star_ring

  bool operator==(const TopologySpec&) const = default;
};

enum class NodeRole { leaf_client, mid_aggregator };

struct TopologyPlan {
  TopologyKind kind = TopologyKind::centralized;
  std::map<std::string, NodeRole> roles;
  std::map<std::string, std::string> parent;
  std::map<std::size_t, std::vector<std::string>> ring_order;
  std::size_t cluster_count = 1;
  std::size_t local_rounds = 1;

  // Ids of mid-aggregators in ascending order.
  std::vector<std::string> mid_aggregators() const;
  std::vector<std::string> children_of(const std::string& node) const;
  std::optional<std::size_t> ring_of(const std::string& client_id) const;

  bool operator==(const TopologyPlan&) const = default;
};

std::string mid_aggregator_id(std::size_t index);

// All violations; empty when the spec is usable.
std::vector<std::string> validate_spec(const TopologySpec& spec);

/// Materializes roles, parents and rings. Hierarchical deals sorted clients
/// round-robin over mid-aggregators; star_ring auto groups chunk sorted
/// clients and orders each ring ascending.
TopologyPlan build_plan(const TopologySpec& spec, std::vector<std::string> client_ids,
                        std::uint64_t seed);

std::string ring_successor(const TopologyPlan& plan, const std::string& client_id);

/// Nearest live member after client_id in ring order. Throws ring-collapsed
/// when no other member is live.
std::string ring_successor(const TopologyPlan& plan, const std::string& client_id,
                           const std::set<std::string>& live);

// Live predecessor, the mirror of the skip-dead successor.
std::string ring_predecessor(const TopologyPlan& plan, const std::string& client_id,
                             const std::set<std::string>& live);

}  // namespace fedtopo
