// Copyright 2026 The fedtopo Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "fedtopo/collector.hpp"
#include "fedtopo/data.hpp"
#include "fedtopo/json_io.hpp"
#include "fedtopo/local_ops.hpp"
#include "fedtopo/model.hpp"
#include "fedtopo/strategy.hpp"
#include "fedtopo/topology.hpp"
#include "fedtopo/transport/sim.hpp"

namespace fedtopo {

struct DataPlan {
  SyntheticSpec generator;
  // num_clients is taken from the topology.
  PartitionSpec partition;
  // Extra samples drawn from the same generator and held by the collector.
  std::size_t holdout_samples = 0;

  bool operator==(const DataPlan&) const = default;
};

enum class TransportKind { inproc, socket };

struct TransportSpec {
  TransportKind kind = TransportKind::inproc;
  std::vector<FaultSpec> faults;
  std::string host = "127.0.0.1";
  std::uint32_t base_port = 8080;
  TimeMs join_timeout_ms = 60'000;
  TimeMs join_retry_ms = 1000;

  bool operator==(const TransportSpec&) const = default;
};

struct RunManifest {
  std::string run_id;
  std::uint64_t seed = 0;
  std::uint64_t total_rounds = 1;
  std::uint64_t checkpoint_every = 0;
  TopologySpec topology;
  StrategyConfig strategy;
  ModelSpec model;
  Hyperparams hyper;  // seed comes from `seed`
  DataPlan data;
  TransportSpec transport;

  bool operator==(const RunManifest&) const = default;
};

// Structural errors (missing fields, wrong types, unknown keys) throw a
// configuration error. Semantic checks live in validate_manifest.
RunManifest manifest_from_json(const Json& doc);
Json to_json(const RunManifest& m);

// Reads and parses a manifest document; throws storage error when the file
// is unreadable and protocol error when it is not valid structured text.
Json read_manifest_file(const std::filesystem::path& path);

/// Applies `dotted.path=value` to the raw document. The value is parsed as
/// structured text when possible and taken as a string otherwise.
/// `training.rounds` is an alias for total_rounds and `training.<k>` for
/// hyper.<k>.
void apply_override(Json& doc, std::string_view assignment);

// Every violation found; empty when the manifest can run.
std::vector<std::string> validate_manifest(const RunManifest& m);

std::string client_id(std::size_t index, std::size_t num_clients);
std::vector<std::string> client_ids(std::size_t num_clients);

struct MaterializedData {
  std::vector<LocalSplit> splits;  // by client index
  Dataset holdout;
};
MaterializedData materialize_data(const RunManifest& m);

struct NodeConfigs {
  CollectorConfig collector;
  std::vector<LocalOpsConfig> locals;  // clients by index, then mid-aggregators
};

// Throws configuration error listing the first violation of an invalid manifest.
NodeConfigs propagate_config(const RunManifest& m);

struct Endpoint {
  std::string host;
  std::uint16_t port = 0;
  bool operator==(const Endpoint&) const = default;
};
using AddressBook = std::map<std::string, Endpoint>;

// collector at base_port, client i at base_port + 1 + i, mid j after clients.
AddressBook address_book(const RunManifest& m);

}  // namespace fedtopo
