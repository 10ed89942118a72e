// Copyright 2026 The fedtopo Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <optional>
#include <queue>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "fedtopo/node.hpp"
#include "fedtopo/rng.hpp"
#include "fedtopo/transport/envelope.hpp"

namespace fedtopo {

inline constexpr const char* kAnyClient = "*";

/// Fault applied to every link touching `target` (a node id, or "*" for
/// every node except the collector), or to the undirected link `link`.
struct FaultSpec {
  std::string target;
  std::optional<std::pair<std::string, std::string>> link;
  double drop_prob = 0.0;
  TimeMs latency_ms = 0;
  std::optional<std::uint64_t> disconnect_at_round;
  std::optional<std::uint64_t> reconnect_at_round;

  bool matches(const std::string& from, const std::string& to) const;
  bool operator==(const FaultSpec&) const = default;
};

std::vector<std::string> validate_fault(const FaultSpec& fault);

enum class LinkStatus { up, down };

struct LinkState {
  std::string from;
  std::string to;
  LinkStatus status = LinkStatus::up;
  // Sorted by deliver_at; never reordered.
  std::deque<std::pair<TimeMs, Envelope>> pending;
};

struct Delivery {
  bool dropped = false;
  TimeMs deliver_at = 0;
};

/// Drops with probability drop_prob (one uniform draw whenever drop_prob >
/// 0), otherwise queues at max(now + latency, last queued time) so a link
/// stays FIFO. A down link drops silently.
Delivery sim_deliver(LinkState& link, const Envelope& env, const FaultSpec& fault, TimeMs now, Rng& rng);

// down iff disconnect_at_round <= round < reconnect_at_round.
LinkStatus apply_lifecycle(const FaultSpec& fault, std::uint64_t round);

/// Combined fault for one directed link: drop probabilities compose as
/// independent events and latencies add. Lifecycle fields are dropped; use
/// link_status for those.
FaultSpec effective_fault(std::span<const FaultSpec> faults, const std::string& from, const std::string& to);
LinkStatus link_status(std::span<const FaultSpec> faults, const std::string& from, const std::string& to,
                       std::uint64_t round);

/// Single-threaded discrete-event network over a virtual clock. Events at
/// equal times run in scheduling order, so runs are reproducible.
class SimNetwork {
 public:
  struct Stats {
    std::uint64_t sent = 0;
    std::uint64_t delivered = 0;
    std::uint64_t dropped = 0;
  };
  using Observer = std::function<void(const Envelope&, TimeMs, bool dropped)>;

  SimNetwork(std::vector<FaultSpec> faults, std::uint64_t seed);

  // Nodes are borrowed and must outlive the network.
  void add_node(Node& node);
  void set_observer(Observer observer) { observer_ = std::move(observer); }

  /// Starts every node, then processes events until `stop` holds, the
  /// queue drains, or the clock passes max_time.
  void run(const std::function<bool()>& stop, TimeMs max_time = 1'000'000'000);

  TimeMs now() const noexcept { return now_; }
  const Stats& stats() const noexcept { return stats_; }
  const LinkState* link(const std::string& from, const std::string& to) const;

 private:
  struct Event {
    TimeMs at;
    std::uint64_t seq;
    bool is_timer;
    std::string node;  // timer owner, or link source
    std::string to;    // link destination
    std::uint64_t timer_id;
  };
  struct Later {
    bool operator()(const Event& a, const Event& b) const {
      return a.at != b.at ? a.at > b.at : a.seq > b.seq;
    }
  };

  void apply(const std::string& node, Outbox& out);
  void push(Event e);
  LinkState& link_for(const std::string& from, const std::string& to);
  Rng& rng_for(const std::string& from, const std::string& to);

  std::vector<FaultSpec> faults_;
  std::uint64_t seed_;
  std::map<std::string, Node*> nodes_;
  std::map<std::pair<std::string, std::string>, LinkState> links_;
  std::map<std::pair<std::string, std::string>, Rng> rngs_;
  std::priority_queue<Event, std::vector<Event>, Later> events_;
  std::uint64_t seq_ = 0;
  TimeMs now_ = 0;
  Stats stats_;
  Observer observer_;
};

}  // namespace fedtopo
