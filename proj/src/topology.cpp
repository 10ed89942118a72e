// Copyright 2026 The fedtopo Authors
// SPDX-License-Identifier: Apache-2.0

#include "fedtopo/topology.hpp"

#include <algorithm>

#include "fedtopo/error.hpp"

namespace fedtopo {

std::string mid_aggregator_id(std::size_t index) { return "mid-" + std::to_string(index); }

std::vector<std::string> TopologyPlan::mid_aggregators() const {
  std::vector<std::string> out;
  for (const auto& [id, role] : roles) {
    if (role == NodeRole::mid_aggregator) out.push_back(id);
  }
  return out;
}

std::vector<std::string> TopologyPlan::children_of(const std::string& node) const {
  std::vector<std::string> out;
  for (const auto& [child, p] : parent) {
    if (p == node) out.push_back(child);
  }
  return out;
}

std::optional<std::size_t> TopologyPlan::ring_of(const std::string& client_id) const {
  for (const auto& [g, members] : ring_order) {
    if (std::find(members.begin(), members.end(), client_id) != members.end()) return g;
  }
  return std::nullopt;
}

std::vector<std::string> validate_spec(const TopologySpec& spec) {
  std::vector<std::string> errors;
  const bool clustered = spec.kind == TopologyKind::clustered;
  const bool hier = spec.kind == TopologyKind::hierarchical;
  const bool ring = spec.kind == TopologyKind::star_ring;

  if (spec.num_clients < 1) errors.emplace_back("num_clients must be >= 1");

  if (clustered && (!spec.num_clusters || *spec.num_clusters < 1)) {
    errors.emplace_back("clustered topology requires num_clusters >= 1");
  }
  if (clustered && spec.num_clusters && *spec.num_clusters > spec.num_clients) {
    errors.emplace_back("more clusters than clients");
  }
  if (!clustered && spec.num_clusters) errors.emplace_back("num_clusters is only valid for clustered");

  if (hier && (!spec.num_mid_aggregators || *spec.num_mid_aggregators < 1)) {
    errors.emplace_back("hierarchical topology requires num_mid_aggregators >= 1");
  }
  if (hier && spec.num_mid_aggregators && *spec.num_mid_aggregators > spec.num_clients) {
    errors.emplace_back("more aggregators than clients");
  }
  if (!hier && spec.num_mid_aggregators) {
    errors.emplace_back("num_mid_aggregators is only valid for hierarchical");
  }

  if ((hier || ring) && (!spec.local_rounds || *spec.local_rounds < 1)) {
    errors.emplace_back("local_rounds must be >= 1");
  }
  if (!hier && !ring && spec.local_rounds) {
    errors.emplace_back("local_rounds is only valid for hierarchical and star_ring");
  }

  if (ring && !spec.ring_groups) errors.emplace_back("star_ring topology requires ring_groups");
  if (!ring && spec.ring_groups) errors.emplace_back("ring_groups is only valid for star_ring");
  if (ring && spec.ring_groups) {
    if (const auto* a = std::get_if<AutoRingGroups>(&*spec.ring_groups)) {
      if (a->group_size < 1) errors.emplace_back("ring group of size 0");
    } else {
      const auto& groups = std::get<std::vector<std::vector<std::string>>>(*spec.ring_groups);
      std::set<std::string> seen;
      std::size_t total = 0;
      bool overlap = false;
      for (const auto& g : groups) {
        if (g.empty()) errors.emplace_back("ring group of size 0");
        for (const auto& id : g) {
          if (!seen.insert(id).second) overlap = true;
          ++total;
        }
      }
      if (overlap) errors.emplace_back("groups not disjoint");
      if (!overlap && total != spec.num_clients) errors.emplace_back("groups do not cover all clients");
    }
  }
  return errors;
}

TopologyPlan build_plan(const TopologySpec& spec, std::vector<std::string> client_ids,
                        std::uint64_t /*seed*/) {
  if (auto errors = validate_spec(spec); !errors.empty()) {
    throw Error(Errc::configuration, errors.front());
  }
  if (client_ids.size() != spec.num_clients) {
    throw Error(Errc::configuration, "expected " + std::to_string(spec.num_clients) +
                                         " client ids, got " + std::to_string(client_ids.size()));
  }
  std::sort(client_ids.begin(), client_ids.end());
  if (std::adjacent_find(client_ids.begin(), client_ids.end()) != client_ids.end()) {
    throw Error(Errc::configuration, "duplicate client id");
  }

  TopologyPlan plan;
  plan.kind = spec.kind;
  plan.cluster_count = spec.num_clusters.value_or(1);
  plan.local_rounds = spec.local_rounds.value_or(1);
  for (const auto& id : client_ids) {
    plan.roles[id] = NodeRole::leaf_client;
    plan.parent[id] = kCollectorId;
  }

  if (spec.kind == TopologyKind::hierarchical) {
    const std::size_t m = *spec.num_mid_aggregators;
    for (std::size_t a = 0; a < m; ++a) {
      plan.roles[mid_aggregator_id(a)] = NodeRole::mid_aggregator;
      plan.parent[mid_aggregator_id(a)] = kCollectorId;
    }
    for (std::size_t i = 0; i < client_ids.size(); ++i) {
      plan.parent[client_ids[i]] = mid_aggregator_id(i % m);
    }
  }

  if (spec.kind == TopologyKind::star_ring) {
    if (const auto* a = std::get_if<AutoRingGroups>(&*spec.ring_groups)) {
      std::size_t g = 0;
      for (std::size_t i = 0; i < client_ids.size(); i += a->group_size, ++g) {
        const std::size_t end = std::min(client_ids.size(), i + a->group_size);
        plan.ring_order[g].assign(client_ids.begin() + static_cast<std::ptrdiff_t>(i),
                                  client_ids.begin() + static_cast<std::ptrdiff_t>(end));
      }
    } else {
      const auto& groups = std::get<std::vector<std::vector<std::string>>>(*spec.ring_groups);
      for (std::size_t g = 0; g < groups.size(); ++g) {
        std::vector<std::string> members = groups[g];
        for (const auto& id : members) {
          if (!std::binary_search(client_ids.begin(), client_ids.end(), id)) {
            throw Error(Errc::configuration, "ring group names unknown client " + id);
          }
        }
        std::sort(members.begin(), members.end());
        plan.ring_order[g] = std::move(members);
      }
    }
  }
  return plan;
}

namespace {

const std::vector<std::string>& ring_members(const TopologyPlan& plan, const std::string& client_id,
                                             std::size_t& pos) {
  for (const auto& [g, members] : plan.ring_order) {
    auto it = std::find(members.begin(), members.end(), client_id);
    if (it != members.end()) {
      pos = static_cast<std::size_t>(it - members.begin());
      return members;
    }
  }
  throw Error(Errc::topology, client_id + " is not a ring member");
}

}  // namespace

std::string ring_successor(const TopologyPlan& plan, const std::string& client_id) {
  std::size_t pos = 0;
  const auto& members = ring_members(plan, client_id, pos);
  return members[(pos + 1) % members.size()];
}

std::string ring_successor(const TopologyPlan& plan, const std::string& client_id,
                           const std::set<std::string>& live) {
  std::size_t pos = 0;
  const auto& members = ring_members(plan, client_id, pos);
  for (std::size_t step = 1; step < members.size(); ++step) {
    const auto& candidate = members[(pos + step) % members.size()];
    if (live.contains(candidate)) return candidate;
  }
  throw Error(Errc::ring_collapsed, "no live successor for " + client_id);
}

std::string ring_predecessor(const TopologyPlan& plan, const std::string& client_id,
                             const std::set<std::string>& live) {
  std::size_t pos = 0;
  const auto& members = ring_members(plan, client_id, pos);
  const std::size_t n = members.size();
  for (std::size_t step = 1; step < n; ++step) {
    const auto& candidate = members[(pos + n - step) % n];
    if (live.contains(candidate)) return candidate;
  }
  throw Error(Errc::ring_collapsed, "no live predecessor for " + client_id);
}

}  // namespace fedtopo
