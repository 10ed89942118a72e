// Copyright 2026 The fedtopo Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <vector>

#include "fedtopo/collector.hpp"
#include "fedtopo/manifest.hpp"
#include "fedtopo/repository.hpp"
#include "fedtopo/transport/sim.hpp"
#include "fedtopo/transport/socket.hpp"

namespace fedtopo {

struct RunOutcome {
  RunSummary summary;
  std::vector<RoundState> history;
  std::vector<MetricRecord> metrics;
  std::vector<ModelParams> models;  // final global model, or one per cluster
  SimNetwork::Stats network;
  TimeMs virtual_ms = 0;
};

/// Collector and every local node in one process over the simulated
/// network. When `repo` is given the run is created there first, so an
/// existing run directory is a storage error.
RunOutcome run_inproc(const RunManifest& manifest, Repository* repo);

/// Spawns `exe serve-collector` and `exe serve-localops` per node, waits for
/// all of them and reads the outcome back from the repository.
RunSummary run_socket(const RunManifest& manifest, const std::filesystem::path& runs_dir,
                      const std::filesystem::path& exe);

// Node processes; the config holds {manifest, node_id, runs_dir}.
int serve_collector(const std::filesystem::path& config_path);
int serve_localops(const std::filesystem::path& config_path);

NodeStatus run_local_ops(const LocalOpsConfig& config, const AddressBook& book,
                         const SocketOptions& options = {});

}  // namespace fedtopo
