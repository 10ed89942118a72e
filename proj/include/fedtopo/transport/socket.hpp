// Copyright 2026 The fedtopo Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <map>
#include <string>

#include "fedtopo/manifest.hpp"
#include "fedtopo/node.hpp"

namespace fedtopo {

struct SocketOptions {
  int connect_attempts = 3;
  TimeMs backoff_ms = 100;      // doubled per attempt
  TimeMs backoff_cap_ms = 1000;
  TimeMs max_wall_ms = 600'000;  // hard stop for a node process
  TimeMs linger_ms = 2000;       // time allowed to flush queued frames on exit
};

/// Drives one node over TCP on localhost-style endpoints. The node listens
/// on its own address-book entry and opens one lazy outbound connection per
/// peer; each connection carries length-prefixed frames in one direction.
/// Returns when the node stops running, its parent becomes unreachable, or
/// max_wall_ms passes (failed).
NodeStatus run_socket_node(Node& node, const AddressBook& book, const std::string& parent_id,
                           const SocketOptions& options = {});

// True once something accepts TCP connections at `endpoint`.
bool probe_endpoint(const Endpoint& endpoint);

}  // namespace fedtopo
