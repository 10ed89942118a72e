// Copyright 2026 The fedtopo Authors
// SPDX-License-Identifier: Apache-2.0

#include "fedtopo/transport/sim.hpp"

#include <algorithm>
#include <cmath>

#include "fedtopo/error.hpp"
#include "fedtopo/topology.hpp"

namespace fedtopo {

bool FaultSpec::matches(const std::string& from, const std::string& to) const {
  if (link) {
    return (link->first == from && link->second == to) || (link->first == to && link->second == from);
  }
  if (target == kAnyClient) return from != kCollectorId || to != kCollectorId;
  return target == from || target == to;
}

std::vector<std::string> validate_fault(const FaultSpec& f) {
  std::vector<std::string> errors;
  if (f.target.empty() && !f.link) errors.emplace_back("fault needs a target or a link");
  if (!f.target.empty() && f.link) errors.emplace_back("fault names both a target and a link");
  if (!(f.drop_prob >= 0.0 && f.drop_prob <= 1.0)) errors.emplace_back("drop_prob must be in [0, 1]");
  if (f.latency_ms < 0) errors.emplace_back("latency_ms must be >= 0");
  if (f.disconnect_at_round && f.reconnect_at_round && *f.reconnect_at_round <= *f.disconnect_at_round) {
    errors.emplace_back("reconnect_at_round must be after disconnect_at_round");
  }
  if (!f.disconnect_at_round && f.reconnect_at_round) {
    errors.emplace_back("reconnect_at_round requires disconnect_at_round");
  }
  return errors;
}

Delivery sim_deliver(LinkState& link, const Envelope& env, const FaultSpec& fault, TimeMs now, Rng& rng) {
  if (link.status == LinkStatus::down) return {true, now};
  if (fault.drop_prob > 0.0 && rng.uniform() < fault.drop_prob) return {true, now};
  TimeMs at = now + fault.latency_ms;
  if (!link.pending.empty()) at = std::max(at, link.pending.back().first);
  link.pending.emplace_back(at, env);
  return {false, at};
}

LinkStatus apply_lifecycle(const FaultSpec& fault, std::uint64_t round) {
  if (!fault.disconnect_at_round || round < *fault.disconnect_at_round) return LinkStatus::up;
  if (fault.reconnect_at_round && round >= *fault.reconnect_at_round) return LinkStatus::up;
  return LinkStatus::down;
}

FaultSpec effective_fault(std::span<const FaultSpec> faults, const std::string& from, const std::string& to) {
  FaultSpec out;
  out.link = std::make_pair(from, to);
  double keep = 1.0;
  for (const auto& f : faults) {
    if (!f.matches(from, to)) continue;
    keep *= 1.0 - f.drop_prob;
    out.latency_ms += f.latency_ms;
  }
  out.drop_prob = 1.0 - keep;
  return out;
}

LinkStatus link_status(std::span<const FaultSpec> faults, const std::string& from, const std::string& to,
                       std::uint64_t round) {
  for (const auto& f : faults) {
    if (f.matches(from, to) && apply_lifecycle(f, round) == LinkStatus::down) return LinkStatus::down;
  }
  return LinkStatus::up;
}

SimNetwork::SimNetwork(std::vector<FaultSpec> faults, std::uint64_t seed)
    : faults_(std::move(faults)), seed_(seed) {}

void SimNetwork::add_node(Node& node) {
  if (!nodes_.emplace(node.id(), &node).second) {
    throw Error(Errc::configuration, "duplicate node id " + node.id());
  }
}

const LinkState* SimNetwork::link(const std::string& from, const std::string& to) const {
  auto it = links_.find({from, to});
  return it == links_.end() ? nullptr : &it->second;
}

LinkState& SimNetwork::link_for(const std::string& from, const std::string& to) {
  auto [it, inserted] = links_.try_emplace({from, to});
  if (inserted) {
    it->second.from = from;
    it->second.to = to;
  }
  return it->second;
}

Rng& SimNetwork::rng_for(const std::string& from, const std::string& to) {
  auto it = rngs_.find({from, to});
  if (it == rngs_.end()) {
    it = rngs_.emplace(std::make_pair(from, to), Rng(mix64(seed_, hash_string(from), hash_string(to)))).first;
  }
  return it->second;
}

void SimNetwork::push(Event e) {
  e.seq = seq_++;
  events_.push(std::move(e));
}

void SimNetwork::apply(const std::string& node, Outbox& out) {
  for (auto& env : out.messages()) {
    ++stats_.sent;
    env.sender = node;
    LinkState& l = link_for(env.sender, env.receiver);
    l.status = link_status(faults_, env.sender, env.receiver, env.round);
    const FaultSpec fault = effective_fault(faults_, env.sender, env.receiver);
    Delivery d{true, now_};
    if (nodes_.contains(env.receiver)) {
      d = sim_deliver(l, env, fault, now_, rng_for(env.sender, env.receiver));
    }
    if (d.dropped) {
      ++stats_.dropped;
      if (observer_) observer_(env, now_, true);
      continue;
    }
    push(Event{d.deliver_at, 0, false, env.sender, env.receiver, 0});
  }
  for (const auto& t : out.timers()) {
    push(Event{std::max(t.at, now_), 0, true, node, {}, t.id});
  }
  out.clear();
}

void SimNetwork::run(const std::function<bool()>& stop, TimeMs max_time) {
  Outbox out;
  for (auto& [id, node] : nodes_) {
    node->on_start(now_, out);
    apply(id, out);
  }
  while (!events_.empty() && !stop()) {
    Event e = events_.top();
    events_.pop();
    if (e.at > max_time) break;
    now_ = e.at;
    if (e.is_timer) {
      nodes_.at(e.node)->on_timer(e.timer_id, now_, out);
      apply(e.node, out);
      continue;
    }
    LinkState& l = link_for(e.node, e.to);
    Envelope env = std::move(l.pending.front().second);
    l.pending.pop_front();
    ++stats_.delivered;
    if (observer_) observer_(env, now_, false);
    nodes_.at(e.to)->on_message(env, now_, out);
    apply(e.to, out);
  }
}

}  // namespace fedtopo
