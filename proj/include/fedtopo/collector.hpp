// Copyright 2026 The fedtopo Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "fedtopo/dataset.hpp"
#include "fedtopo/model.hpp"
#include "fedtopo/node.hpp"
#include "fedtopo/repository.hpp"
#include "fedtopo/strategy.hpp"
#include "fedtopo/topology.hpp"
#include "fedtopo/transport/envelope.hpp"

namespace fedtopo {

struct CollectorConfig {
  std::string run_id;
  StrategyConfig strategy;
  TopologyPlan topology;
  std::uint64_t total_rounds = 1;
  ModelSpec model_spec;
  std::uint64_t run_seed = 0;
  Hyperparams hyper;  // seed is replaced by run_seed on the wire
  TimeMs join_timeout_ms = 60'000;
  std::uint64_t checkpoint_every = 0;  // 0 = final artifact only
  std::optional<Dataset> holdout;
};

std::vector<std::string> validate_collector_config(const CollectorConfig& config);

enum class RoundPhase { waiting_clients, fitting, aggregating, evaluating, done, aborted };
std::string_view to_string(RoundPhase p);

struct RoundState {
  std::uint64_t round = 0;
  std::uint32_t attempt = 0;
  RoundPhase phase = RoundPhase::waiting_clients;
  std::vector<std::string> sampled;
  std::map<std::string, FitResult> received;
  std::set<std::string> failed;  // sampled nodes that answered with ERROR
  TimeMs started_ms = 0;
  TimeMs deadline_ms = 0;
  std::vector<std::string> eval_sampled;
  std::map<std::string, EvalResult> eval_received;
  std::set<std::string> eval_failed;
};

struct RunSummary {
  std::string run_id;
  std::uint64_t rounds_completed = 0;
  RunStatus status = RunStatus::running;
  std::optional<double> final_accuracy;
  bool persisted = true;
  std::string error;  // why the run aborted, if it did
};

/// The training collector as an event-driven node. It waits for enough
/// clients, then drives rounds of sample -> FIT -> aggregate -> EVAL ->
/// metrics, retrying an under-quorum round once before aborting the run.
/// Metrics and artifacts go to `repo` when one is given.
class CollectorNode final : public Node {
 public:
  CollectorNode(CollectorConfig config, Repository* repo);

  const std::string& id() const override { return id_; }
  void on_start(TimeMs now, Outbox& out) override;
  void on_message(const Envelope& env, TimeMs now, Outbox& out) override;
  void on_timer(std::uint64_t timer_id, TimeMs now, Outbox& out) override;
  NodeStatus status() const override { return status_; }

  const std::map<std::string, ClientHandle>& registry() const noexcept { return registry_; }
  // Finished attempts in order, including retried and aborted ones.
  const std::vector<RoundState>& history() const noexcept { return history_; }
  const std::vector<MetricRecord>& metrics() const noexcept { return metrics_; }
  // Global model, or one model per cluster.
  const std::vector<ModelParams>& models() const noexcept { return models_; }
  const RunSummary& summary() const noexcept { return summary_; }

 private:
  std::vector<std::string> eligible() const;
  std::uint64_t eligible_leaves() const;
  void maybe_start(TimeMs now, Outbox& out);
  void start_round(std::uint64_t round, std::uint32_t attempt, TimeMs now, Outbox& out);
  TimeMs round_span() const;
  void on_fit_result(const Envelope& env, const FitResult& result, TimeMs now, Outbox& out);
  void on_eval_result(const Envelope& env, const EvalResult& result, TimeMs now, Outbox& out);
  void finish_fit(TimeMs now, Outbox& out);
  void start_eval(TimeMs now, Outbox& out);
  void finish_eval(TimeMs now, Outbox& out);
  void emit(std::uint64_t round, std::string scope, std::string metric, double value);
  void end_run(RunStatus status, std::string error, Outbox& out);
  void finalize_run();
  std::uint64_t arm(TimeMs at, Outbox& out);

  std::string id_;
  CollectorConfig config_;
  Repository* repo_;
  NodeStatus status_ = NodeStatus::running;
  std::map<std::string, ClientHandle> registry_;
  std::set<std::string> known_;  // every node that ever sent JOIN
  std::set<std::string> children_;
  std::vector<ModelParams> models_;
  RoundState state_;
  std::vector<RoundState> history_;
  std::vector<MetricRecord> metrics_;
  RunSummary summary_;
  std::uint64_t next_timer_ = 1;
  std::uint64_t join_timer_ = 0;
  std::uint64_t deadline_timer_ = 0;
};

}  // namespace fedtopo
