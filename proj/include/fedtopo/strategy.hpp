// Copyright 2026 The fedtopo Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "fedtopo/model.hpp"

namespace fedtopo {

struct StrategyConfig {
  std::size_t min_available_clients = 1;
  std::size_t min_fit_clients = 1;
  double fit_fraction = 1.0;
  double eval_fraction = 1.0;
  std::int64_t round_timeout_ms = 1000;
  std::set<std::string> blacklist;
  std::size_t num_clusters = 1;  // 1 = plain FedAvg

  bool operator==(const StrategyConfig&) const = default;
};

std::vector<std::string> validate_strategy(const StrategyConfig& config);

struct ClientHandle {
  std::string client_id;
  std::uint64_t num_samples_hint = 0;
  std::uint64_t joined_at = 0;
  // Leaves represented by this handle (>1 only for mid-aggregators).
  std::uint64_t leaf_count = 1;

  bool operator==(const ClientHandle&) const = default;
};

struct FitInstruction {
  std::uint64_t round = 0;
  // Training step fed into the client seed; equals `round` for
  // collector-driven fits and (round-1)*local_rounds + local_round below a
  // mid-aggregator.
  std::uint64_t step = 0;
  bool clustered = false;
  std::vector<ModelParams> params;  // one entry unless clustered
  Hyperparams hyper;                // hyper.seed carries the run seed
  std::int64_t deadline_ms = 0;
  // Ring topologies: members the collector instructed this round.
  std::vector<std::string> live;

  bool operator==(const FitInstruction&) const = default;
};

struct FitResult {
  std::string client_id;
  std::uint64_t step = 0;  // echo of FitInstruction::step
  ModelParams params;
  std::uint64_t num_samples = 0;
  TrainMetrics train_metrics;
  std::uint32_t cluster_id = 0;
  std::uint64_t leaf_count = 1;
  // Nodes whose data trained this model, in order (ring members only).
  std::vector<std::string> trace;

  bool operator==(const FitResult&) const = default;
};

/// Seeded sampling without replacement from `available` minus `blacklist`.
/// Returns max(min_n, ceil(fraction * |eligible|)) handles sorted by id;
/// throws insufficient-clients when fewer than min_n are eligible.
std::vector<ClientHandle> sample_clients(std::span<const ClientHandle> available, double fraction,
                                         std::size_t min_n, const std::set<std::string>& blacklist,
                                         std::uint64_t rng_seed);

/// Sample-count weighted elementwise mean. Results are summed in ascending
/// client_id order as ref + sum_i (n_i / N) (x_i - ref) with ref the first
/// result, and each coordinate is clamped to the input range, so a single
/// result or identical inputs come back bit-exact.
ModelParams fedavg_aggregate(std::span<const FitResult> results);

// Weighted mean of scalars using the same ref + delta scheme.
double weighted_mean(std::span<const double> values, std::span<const double> weights);

/// Lowest-loss cluster for a client's training data; ties go to the lowest
/// index.
std::size_t ifca_assign(const ModelSpec& spec, std::span<const ModelParams> cluster_params,
                        const Dataset& local_train);

// Per-cluster FedAvg; clusters without results keep their params.
std::vector<ModelParams> ifca_aggregate(std::span<const ModelParams> cluster_params,
                                        std::span<const FitResult> results);

struct EvalAggregate {
  double aggregated_eval_loss = 0.0;
  double global_accuracy = 0.0;
  std::uint64_t num_samples = 0;
};

// Sample-weighted loss and accuracy, accumulated in ascending client order.
EvalAggregate aggregate_evaluate(std::span<const std::pair<std::string, EvalMetrics>> evals);

}  // namespace fedtopo
