// Copyright 2026 The fedtopo Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "fedtopo/transport/envelope.hpp"

namespace fedtopo {

using TimeMs = std::int64_t;

/// Effects a node requests while handling one event. The driving transport
/// (simulator or socket runtime) applies them after the handler returns.
class Outbox {
 public:
  struct Timer {
    TimeMs at = 0;
    std::uint64_t id = 0;
  };

  void send(Envelope env) { messages_.push_back(std::move(env)); }
  void set_timer(TimeMs at, std::uint64_t id) { timers_.push_back({at, id}); }

  std::vector<Envelope>& messages() noexcept { return messages_; }
  std::vector<Timer>& timers() noexcept { return timers_; }
  void clear() {
    messages_.clear();
    timers_.clear();
  }

 private:
  std::vector<Envelope> messages_;
  std::vector<Timer> timers_;
};

enum class NodeStatus { running, completed, failed };

/// Event-driven protocol participant. Handlers never block and never touch
/// I/O; all time comes in through `now`.
class Node {
 public:
  virtual ~Node() = default;

  virtual const std::string& id() const = 0;
  virtual void on_start(TimeMs now, Outbox& out) = 0;
  virtual void on_message(const Envelope& env, TimeMs now, Outbox& out) = 0;
  virtual void on_timer(std::uint64_t timer_id, TimeMs now, Outbox& out) = 0;
  virtual NodeStatus status() const = 0;
};

}  // namespace fedtopo
