// Copyright 2026 The fedtopo Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "fedtopo/data.hpp"
#include "fedtopo/model.hpp"
#include "fedtopo/node.hpp"
#include "fedtopo/strategy.hpp"
#include "fedtopo/topology.hpp"
#include "fedtopo/transport/envelope.hpp"

namespace fedtopo {

enum class LocalRole { leaf, mid_aggregator, ring_member };
std::string_view to_string(LocalRole r);

struct LocalOpsConfig {
  std::string client_id;
  std::string parent_id = kCollectorId;
  LocalRole role = LocalRole::leaf;
  ModelSpec model_spec;

  // leaf and ring_member
  std::size_t client_index = 0;
  std::size_t partition_index = 0;
  std::uint64_t split_seed = 0;
  LocalSplit data;

  // mid_aggregator and ring_member
  std::size_t local_rounds = 1;
  // ring_member: the whole ring in pass order
  std::vector<std::string> ring;
  // mid_aggregator
  std::vector<std::string> children;
  std::size_t mid_min_fit = 1;

  TimeMs round_timeout_ms = 1000;
  TimeMs join_retry_ms = 1000;
  TimeMs join_timeout_ms = 60'000;
};

std::vector<std::string> validate_local_config(const LocalOpsConfig& config);

// Per-client training seed for one step.
std::uint64_t client_seed(std::uint64_t run_seed, std::size_t client_index, std::uint64_t step);

struct LocalState {
  std::string client_id;
  std::size_t client_index = 0;
  ModelSpec spec;
  Dataset train;
  Dataset test;
};

/// Plain fit trains the single received model; a clustered fit first picks
/// the cluster whose model has the lowest loss on the train split and trains
/// that one. Throws shape error when received params do not fit the spec.
FitResult handle_fit(const LocalState& state, const FitInstruction& instruction);

// Throws empty-partition error when the test split is empty.
EvalResult handle_eval(const LocalState& state, const EvalInstruction& instruction);

struct MidOutcome {
  std::optional<ModelParams> rebroadcast;  // local rounds before the last
  std::optional<FitResult> upward;         // final local round
  std::optional<ErrorMsg> error;           // under quorum
};

/// One local round of a mid-aggregator: FedAvg over the children's results,
/// then rebroadcast (local_round < local_rounds) or report upward with the
/// children's summed sample and leaf counts.
MidOutcome mid_layer_round(std::span<const FitResult> children, std::uint64_t local_round,
                           std::uint64_t round, const std::string& self, std::size_t local_rounds,
                           std::size_t min_fit = 1);

struct RingContext {
  std::uint64_t round = 0;
  std::uint64_t run_seed = 0;
  Hyperparams hyper;
  std::size_t local_rounds = 1;
  std::vector<std::string> ring;
  std::set<std::string> live;
};

struct RingStep {
  std::optional<std::pair<std::string, RingPassMsg>> forward;  // (successor, pass)
  std::optional<FitResult> submit;
};

/// Train the incoming model for one epoch, then forward it to the next live
/// ring member, or submit it once local_rounds passes are done. With no
/// other live member the remaining passes are trained locally.
RingStep ring_pass_step(const LocalState& state, const RingPassMsg& incoming, const RingContext& ctx);

/// Leaf client or ring member.
class LocalOpsNode final : public Node {
 public:
  explicit LocalOpsNode(LocalOpsConfig config);

  const std::string& id() const override { return config_.client_id; }
  void on_start(TimeMs now, Outbox& out) override;
  void on_message(const Envelope& env, TimeMs now, Outbox& out) override;
  void on_timer(std::uint64_t timer_id, TimeMs now, Outbox& out) override;
  NodeStatus status() const override { return status_; }

  const LocalState& state() const noexcept { return state_; }
  std::uint64_t fit_results_sent() const noexcept { return fit_results_sent_; }
  const std::vector<ModelParams>& final_models() const noexcept { return final_models_; }
  bool accepted() const noexcept { return accepted_; }

 private:
  void send_join(TimeMs now, Outbox& out);
  void on_fit(const Envelope& env, const FitInstruction& fit, TimeMs now, Outbox& out);
  void ring_apply(const RingPassMsg& pass, TimeMs now, Outbox& out);
  void send_result(FitResult result, Outbox& out);
  void fail(std::string message, Outbox& out);

  LocalOpsConfig config_;
  LocalState state_;
  NodeStatus status_ = NodeStatus::running;
  bool acked_ = false;
  bool accepted_ = false;
  TimeMs started_ = 0;
  std::uint64_t next_timer_ = 1;
  std::uint64_t join_timer_ = 0;
  std::uint64_t fit_results_sent_ = 0;
  std::vector<ModelParams> final_models_;

  // ring_member
  std::optional<RingContext> ring_;
  bool ring_submitted_ = true;
  RingPassMsg last_sent_;
  std::uint64_t ring_timer_ = 0;
  std::uint64_t highest_received_ = 0;
  std::map<std::uint64_t, std::vector<RingPassMsg>> early_;  // passes for future rounds
};

class MidAggregatorNode final : public Node {
 public:
  explicit MidAggregatorNode(LocalOpsConfig config);

  const std::string& id() const override { return config_.client_id; }
  void on_start(TimeMs now, Outbox& out) override;
  void on_message(const Envelope& env, TimeMs now, Outbox& out) override;
  void on_timer(std::uint64_t timer_id, TimeMs now, Outbox& out) override;
  NodeStatus status() const override { return status_; }

  const std::map<std::string, std::uint64_t>& joined_children() const noexcept { return joined_; }

 private:
  void join_upward(Outbox& out);
  void start_local_round(TimeMs now, Outbox& out);
  void finish_local_round(TimeMs now, Outbox& out);
  void finish_eval(Outbox& out);
  std::uint64_t arm(TimeMs at, Outbox& out);

  LocalOpsConfig config_;
  std::set<std::string> children_;
  NodeStatus status_ = NodeStatus::running;
  std::map<std::string, std::uint64_t> joined_;  // child -> num_samples_hint
  std::uint64_t acked_leaves_ = 0;
  TimeMs started_ = 0;
  std::uint64_t next_timer_ = 1;
  std::uint64_t join_timer_ = 0;

  enum class Phase { idle, fitting, evaluating };
  Phase phase_ = Phase::idle;
  std::uint64_t round_ = 0;
  std::uint64_t local_round_ = 0;
  FitInstruction instruction_;
  ModelParams current_;
  std::vector<std::string> expected_;
  std::map<std::string, FitResult> results_;
  std::map<std::string, EvalResult> evals_;
  std::set<std::string> responded_;
  std::uint64_t deadline_timer_ = 0;
};

}  // namespace fedtopo
