// Copyright 2026 The fedtopo Authors
// SPDX-License-Identifier: Apache-2.0

#include "fedtopo/local_ops.hpp"

#include <algorithm>

#include "fedtopo/error.hpp"
#include "fedtopo/rng.hpp"

namespace fedtopo {

namespace {

ErrorMsg error_msg(Errc code, std::string message) {
  return ErrorMsg{std::string(to_string(code)), std::move(message)};
}

}  // namespace

std::string_view to_string(LocalRole r) {
  switch (r) {
    case LocalRole::leaf: return "leaf";
    case LocalRole::mid_aggregator: return "mid_aggregator";
    case LocalRole::ring_member: return "ring_member";
  }
  return "leaf";
}

std::vector<std::string> validate_local_config(const LocalOpsConfig& c) {
  std::vector<std::string> errors;
  if (c.client_id.empty()) errors.emplace_back("client_id is empty");
  if (c.parent_id.empty()) errors.emplace_back("parent_id is empty");
  const bool mid = c.role == LocalRole::mid_aggregator;
  const bool ring = c.role == LocalRole::ring_member;
  if ((mid || ring) && c.local_rounds < 1) errors.emplace_back("local_rounds must be >= 1");
  if (mid && c.children.empty()) errors.emplace_back("mid_aggregator needs children");
  if (!mid && !c.children.empty()) errors.emplace_back("children are only valid for mid_aggregator");
  if (mid && c.mid_min_fit < 1) errors.emplace_back("mid_min_fit must be >= 1");
  if (ring && std::find(c.ring.begin(), c.ring.end(), c.client_id) == c.ring.end()) {
    errors.emplace_back("ring member is not in its ring");
  }
  if (!ring && !c.ring.empty()) errors.emplace_back("ring is only valid for ring_member");
  if (!mid && c.data.train.empty()) errors.emplace_back("empty train split");
  if (c.round_timeout_ms <= 0) errors.emplace_back("round_timeout_ms must be > 0");
  if (c.join_retry_ms <= 0) errors.emplace_back("join_retry_ms must be > 0");
  return errors;
}

std::uint64_t client_seed(std::uint64_t run_seed, std::size_t client_index, std::uint64_t step) {
  return mix64(run_seed, client_index, step);
}

FitResult handle_fit(const LocalState& state, const FitInstruction& fit) {
  if (fit.params.empty()) throw Error(Errc::shape, "fit instruction carries no params");
  for (const auto& p : fit.params) check_params(state.spec, p);
  if (!fit.clustered && fit.params.size() != 1) throw Error(Errc::shape, "plain fit expects one model");

  const std::size_t cluster = fit.clustered ? ifca_assign(state.spec, fit.params, state.train) : 0;
  Hyperparams hyper = fit.hyper;
  hyper.seed = client_seed(fit.hyper.seed, state.client_index, fit.step);
  auto trained = train_local(state.spec, fit.params[cluster], state.train, hyper);

  FitResult r;
  r.client_id = state.client_id;
  r.step = fit.step;
  r.params = std::move(trained.params);
  r.num_samples = state.train.size();
  r.train_metrics = trained.metrics;
  r.cluster_id = static_cast<std::uint32_t>(cluster);
  return r;
}

EvalResult handle_eval(const LocalState& state, const EvalInstruction& eval) {
  if (eval.params.empty()) throw Error(Errc::shape, "eval instruction carries no params");
  for (const auto& p : eval.params) check_params(state.spec, p);
  if (state.test.empty()) throw Error(Errc::empty_partition, state.client_id + " has an empty test split");
  const std::size_t cluster = eval.clustered ? ifca_assign(state.spec, eval.params, state.train) : 0;
  return EvalResult{state.client_id, evaluate_model(state.spec, eval.params[cluster], state.test),
                    static_cast<std::uint32_t>(cluster), 1};
}

MidOutcome mid_layer_round(std::span<const FitResult> children, std::uint64_t local_round,
                           std::uint64_t round, const std::string& self, std::size_t local_rounds,
                           std::size_t min_fit) {
  MidOutcome out;
  if (children.empty() || children.size() < min_fit) {
    out.error = error_msg(Errc::round_abort, self + " under quorum: " + std::to_string(children.size()) +
                                                 " child results in local round " +
                                                 std::to_string(local_round));
    return out;
  }
  ModelParams agg = fedavg_aggregate(children);
  if (local_round < local_rounds) {
    out.rebroadcast = std::move(agg);
    return out;
  }
  std::vector<double> losses;
  std::vector<double> weights;
  FitResult up;
  up.client_id = self;
  up.step = round;
  up.leaf_count = 0;
  for (const auto& c : children) {
    up.num_samples += c.num_samples;
    up.leaf_count += c.leaf_count;
    up.train_metrics.duration_ms = std::max(up.train_metrics.duration_ms, c.train_metrics.duration_ms);
    losses.push_back(c.train_metrics.train_loss);
    weights.push_back(static_cast<double>(c.num_samples));
  }
  up.params = std::move(agg);
  up.train_metrics.num_samples = up.num_samples;
  up.train_metrics.train_loss = weighted_mean(losses, weights);
  out.upward = std::move(up);
  return out;
}

RingStep ring_pass_step(const LocalState& state, const RingPassMsg& incoming, const RingContext& ctx) {
  check_params(state.spec, incoming.params);
  TopologyPlan plan;
  plan.ring_order[0] = ctx.ring;

  Hyperparams hyper = ctx.hyper;
  hyper.local_epochs = 1;
  hyper.seed = client_seed(ctx.run_seed, state.client_index, ctx.round);

  RingPassMsg model = incoming;
  TrainMetrics metrics;
  for (;;) {
    auto trained = train_local(state.spec, model.params, state.train, hyper,
                               static_cast<std::uint32_t>(model.pass));
    model.params = std::move(trained.params);
    model.train_loss = trained.metrics.train_loss;
    model.trace.push_back(state.client_id);
    ++model.pass;
    metrics = trained.metrics;
    if (model.pass >= ctx.local_rounds) break;
    try {
      return RingStep{std::make_pair(ring_successor(plan, state.client_id, ctx.live), std::move(model)),
                      std::nullopt};
    } catch (const Error& e) {
      if (e.code() != Errc::ring_collapsed) throw;
    }
  }
  FitResult r;
  r.client_id = state.client_id;
  r.step = ctx.round;
  r.params = std::move(model.params);
  r.num_samples = state.train.size();
  r.train_metrics = metrics;
  r.trace = std::move(model.trace);
  return RingStep{std::nullopt, std::move(r)};
}

// ---------------------------------------------------------------- leaf / ring

LocalOpsNode::LocalOpsNode(LocalOpsConfig config) : config_(std::move(config)) {
  if (config_.role == LocalRole::mid_aggregator) {
    throw Error(Errc::configuration, "use MidAggregatorNode for mid_aggregator configs");
  }
  if (auto errors = validate_local_config(config_); !errors.empty()) {
    throw Error(Errc::configuration, config_.client_id + ": " + errors.front());
  }
  state_ = LocalState{config_.client_id, config_.client_index, config_.model_spec, config_.data.train,
                      config_.data.test};
}

void LocalOpsNode::send_join(TimeMs now, Outbox& out) {
  out.send({config_.client_id, config_.parent_id, 0, JoinMsg{state_.train.size(), 1}});
  join_timer_ = next_timer_++;
  out.set_timer(now + config_.join_retry_ms, join_timer_);
}

void LocalOpsNode::on_start(TimeMs now, Outbox& out) {
  started_ = now;
  send_join(now, out);
}

void LocalOpsNode::on_timer(std::uint64_t timer_id, TimeMs now, Outbox& out) {
  if (status_ != NodeStatus::running) return;
  if (timer_id == join_timer_ && !acked_) {
    if (now - started_ >= config_.join_timeout_ms) {
      status_ = NodeStatus::failed;
      return;
    }
    send_join(now, out);
    return;
  }
  if (timer_id == ring_timer_ && ring_ && !ring_submitted_) {
    // The expected pass never arrived: finish locally from the last copy sent.
    RingContext solo = *ring_;
    solo.live = {config_.client_id};
    ring_ = solo;
    ring_apply(last_sent_, now, out);
  }
}

void LocalOpsNode::fail(std::string message, Outbox& out) {
  out.send({config_.client_id, config_.parent_id, 0, error_msg(Errc::protocol, std::move(message))});
}

void LocalOpsNode::send_result(FitResult result, Outbox& out) {
  const std::uint64_t round = ring_ ? ring_->round : result.step;
  out.send({config_.client_id, config_.parent_id, round, std::move(result)});
  ++fit_results_sent_;
}

void LocalOpsNode::on_message(const Envelope& env, TimeMs now, Outbox& out) {
  if (status_ != NodeStatus::running) return;
  switch (env.msg_type()) {
    case MsgType::JOIN_ACK:
      if (env.sender == config_.parent_id) {
        acked_ = true;
        accepted_ = std::get<JoinAckMsg>(env.payload).accepted;
      }
      return;
    case MsgType::FIT_INSTRUCT:
      if (env.sender == config_.parent_id) on_fit(env, std::get<FitInstruction>(env.payload), now, out);
      return;
    case MsgType::EVAL_INSTRUCT: {
      if (env.sender != config_.parent_id) return;
      try {
        out.send({config_.client_id, config_.parent_id, env.round,
                  handle_eval(state_, std::get<EvalInstruction>(env.payload))});
      } catch (const Error& e) {
        out.send({config_.client_id, config_.parent_id, env.round, error_msg(e.code(), e.what())});
      }
      return;
    }
    case MsgType::RING_PASS: {
      if (config_.role != LocalRole::ring_member) {
        fail("unexpected RING_PASS", out);
        return;
      }
      const auto& pass = std::get<RingPassMsg>(env.payload);
      if (ring_ && env.round == ring_->round) {
        if (!ring_submitted_) ring_apply(pass, now, out);
      } else if (!ring_ || env.round > ring_->round) {
        early_[env.round].push_back(pass);
      }
      return;
    }
    case MsgType::MODEL_BROADCAST:
      if (env.sender == config_.parent_id) final_models_ = std::get<ModelBroadcastMsg>(env.payload).params;
      return;
    case MsgType::SHUTDOWN:
      if (env.sender == config_.parent_id) status_ = NodeStatus::completed;
      return;
    default:
      return;
  }
}

void LocalOpsNode::on_fit(const Envelope& env, const FitInstruction& fit, TimeMs now, Outbox& out) {
  if (config_.role == LocalRole::leaf) {
    try {
      auto result = handle_fit(state_, fit);
      out.send({config_.client_id, config_.parent_id, env.round, std::move(result)});
      ++fit_results_sent_;
    } catch (const Error& e) {
      out.send({config_.client_id, config_.parent_id, env.round, error_msg(e.code(), e.what())});
    }
    return;
  }

  if (fit.params.size() != 1) {
    out.send({config_.client_id, config_.parent_id, env.round,
              error_msg(Errc::shape, "ring fit expects one model")});
    return;
  }
  RingContext ctx;
  ctx.round = env.round;
  ctx.run_seed = fit.hyper.seed;
  ctx.hyper = fit.hyper;
  ctx.local_rounds = config_.local_rounds;
  ctx.ring = config_.ring;
  ctx.live.insert(fit.live.begin(), fit.live.end());
  ctx.live.insert(config_.client_id);
  ring_ = std::move(ctx);
  ring_submitted_ = false;
  highest_received_ = 0;
  ring_apply(RingPassMsg{0, fit.params.front(), {}, 0.0}, now, out);

  for (auto it = early_.begin(); it != early_.end();) {
    if (it->first < env.round) {
      it = early_.erase(it);
    } else if (it->first == env.round) {
      for (const auto& pass : it->second) {
        if (!ring_submitted_) ring_apply(pass, now, out);
      }
      it = early_.erase(it);
    } else {
      ++it;
    }
  }
}

void LocalOpsNode::ring_apply(const RingPassMsg& pass, TimeMs now, Outbox& out) {
  highest_received_ = std::max(highest_received_, pass.pass);
  RingStep step;
  try {
    step = ring_pass_step(state_, pass, *ring_);
  } catch (const Error& e) {
    ring_submitted_ = true;
    out.send({config_.client_id, config_.parent_id, ring_->round, error_msg(e.code(), e.what())});
    return;
  }
  if (step.submit) {
    ring_submitted_ = true;
    ring_timer_ = 0;
    send_result(std::move(*step.submit), out);
    return;
  }
  auto& [next, msg] = *step.forward;
  last_sent_ = msg;
  out.send({config_.client_id, next, ring_->round, std::move(msg)});
  ring_timer_ = next_timer_++;
  out.set_timer(now + config_.round_timeout_ms, ring_timer_);
}

// ------------------------------------------------------------ mid-aggregator

MidAggregatorNode::MidAggregatorNode(LocalOpsConfig config) : config_(std::move(config)) {
  if (config_.role != LocalRole::mid_aggregator) {
    throw Error(Errc::configuration, "MidAggregatorNode needs a mid_aggregator config");
  }
  if (auto errors = validate_local_config(config_); !errors.empty()) {
    throw Error(Errc::configuration, config_.client_id + ": " + errors.front());
  }
  children_.insert(config_.children.begin(), config_.children.end());
}

std::uint64_t MidAggregatorNode::arm(TimeMs at, Outbox& out) {
  const std::uint64_t id = next_timer_++;
  out.set_timer(at, id);
  return id;
}

void MidAggregatorNode::on_start(TimeMs now, Outbox& out) {
  started_ = now;
  join_timer_ = arm(now + config_.join_retry_ms, out);
}

void MidAggregatorNode::join_upward(Outbox& out) {
  std::uint64_t hint = 0;
  for (const auto& [id, n] : joined_) hint += n;
  out.send({config_.client_id, config_.parent_id, 0, JoinMsg{hint, joined_.size()}});
}

void MidAggregatorNode::on_timer(std::uint64_t timer_id, TimeMs now, Outbox& out) {
  if (status_ != NodeStatus::running) return;
  if (timer_id == join_timer_) {
    if (acked_leaves_ == joined_.size() && !joined_.empty()) {
      join_timer_ = 0;
      return;
    }
    if (now - started_ >= config_.join_timeout_ms) {
      status_ = NodeStatus::failed;
      return;
    }
    if (!joined_.empty()) join_upward(out);
    join_timer_ = arm(now + config_.join_retry_ms, out);
    return;
  }
  if (timer_id != deadline_timer_) return;
  deadline_timer_ = 0;
  if (phase_ == Phase::fitting) finish_local_round(now, out);
  if (phase_ == Phase::evaluating) finish_eval(out);
}

void MidAggregatorNode::on_message(const Envelope& env, TimeMs now, Outbox& out) {
  if (status_ != NodeStatus::running) return;
  const bool from_parent = env.sender == config_.parent_id;
  const bool from_child = children_.contains(env.sender);
  switch (env.msg_type()) {
    case MsgType::JOIN: {
      if (!from_child) {
        out.send({config_.client_id, env.sender, 0, error_msg(Errc::topology, "unknown node")});
        return;
      }
      const auto& join = std::get<JoinMsg>(env.payload);
      const bool changed = !joined_.contains(env.sender);
      joined_[env.sender] = join.num_samples_hint;
      out.send({config_.client_id, env.sender, 0, JoinAckMsg{true, join.leaf_count}});
      if (changed && joined_.size() == children_.size()) join_upward(out);
      if (changed && join_timer_ == 0) join_timer_ = arm(now + config_.join_retry_ms, out);
      return;
    }
    case MsgType::JOIN_ACK:
      if (from_parent) {
        const auto& ack = std::get<JoinAckMsg>(env.payload);
        acked_leaves_ = ack.accepted ? ack.leaf_count : 0;
        if (!ack.accepted) status_ = NodeStatus::completed;
      }
      return;
    case MsgType::FIT_INSTRUCT: {
      if (!from_parent) return;
      instruction_ = std::get<FitInstruction>(env.payload);
      try {
        if (instruction_.params.size() != 1) throw Error(Errc::shape, "mid-aggregator expects one model");
        check_params(config_.model_spec, instruction_.params.front());
      } catch (const Error& e) {
        out.send({config_.client_id, config_.parent_id, env.round, error_msg(e.code(), e.what())});
        return;
      }
      round_ = env.round;
      local_round_ = 1;
      current_ = instruction_.params.front();
      start_local_round(now, out);
      return;
    }
    case MsgType::FIT_RESULT: {
      if (!from_child || phase_ != Phase::fitting || env.round != round_) return;
      const auto& r = std::get<FitResult>(env.payload);
      const std::uint64_t step = (round_ - 1) * config_.local_rounds + local_round_;
      if (r.step != step || responded_.contains(env.sender)) return;
      if (std::find(expected_.begin(), expected_.end(), env.sender) == expected_.end()) return;
      responded_.insert(env.sender);
      bool ok = r.num_samples > 0;
      try {
        check_params(config_.model_spec, r.params);
      } catch (const Error&) {
        ok = false;
      }
      if (ok) {
        FitResult copy = r;
        copy.client_id = env.sender;
        results_.emplace(env.sender, std::move(copy));
      }
      if (responded_.size() == expected_.size()) finish_local_round(now, out);
      return;
    }
    case MsgType::EVAL_INSTRUCT: {
      if (!from_parent) return;
      phase_ = Phase::evaluating;
      round_ = env.round;
      evals_.clear();
      responded_.clear();
      expected_.clear();
      for (const auto& [id, n] : joined_) expected_.push_back(id);
      auto eval = std::get<EvalInstruction>(env.payload);
      eval.deadline_ms = now + config_.round_timeout_ms;
      for (const auto& id : expected_) out.send({config_.client_id, id, round_, eval});
      deadline_timer_ = arm(eval.deadline_ms, out);
      if (expected_.empty()) finish_eval(out);
      return;
    }
    case MsgType::EVAL_RESULT: {
      if (!from_child || phase_ != Phase::evaluating || env.round != round_) return;
      if (responded_.contains(env.sender)) return;
      if (std::find(expected_.begin(), expected_.end(), env.sender) == expected_.end()) return;
      responded_.insert(env.sender);
      const auto& r = std::get<EvalResult>(env.payload);
      if (r.metrics.num_samples > 0) evals_.emplace(env.sender, r);
      if (responded_.size() == expected_.size()) finish_eval(out);
      return;
    }
    case MsgType::ERROR: {
      if (!from_child || !responded_.insert(env.sender).second) return;
      if (phase_ == Phase::fitting && responded_.size() == expected_.size()) finish_local_round(now, out);
      else if (phase_ == Phase::evaluating && responded_.size() == expected_.size()) finish_eval(out);
      return;
    }
    case MsgType::ROUND_DONE:
    case MsgType::MODEL_BROADCAST:
    case MsgType::SHUTDOWN: {
      if (!from_parent) return;
      for (const auto& [id, n] : joined_) out.send({config_.client_id, id, env.round, env.payload});
      if (env.msg_type() == MsgType::SHUTDOWN) status_ = NodeStatus::completed;
      return;
    }
    default:
      return;
  }
}

void MidAggregatorNode::start_local_round(TimeMs now, Outbox& out) {
  phase_ = Phase::fitting;
  results_.clear();
  responded_.clear();
  expected_.clear();
  for (const auto& [id, n] : joined_) expected_.push_back(id);

  FitInstruction fit = instruction_;
  fit.step = (round_ - 1) * config_.local_rounds + local_round_;
  fit.params = {current_};
  fit.deadline_ms = now + config_.round_timeout_ms;
  fit.live.clear();
  for (const auto& id : expected_) out.send({config_.client_id, id, round_, fit});
  deadline_timer_ = arm(fit.deadline_ms, out);
  if (expected_.empty()) finish_local_round(now, out);
}

void MidAggregatorNode::finish_local_round(TimeMs now, Outbox& out) {
  deadline_timer_ = 0;
  std::vector<FitResult> results;
  for (const auto& [id, r] : results_) results.push_back(r);
  auto outcome = mid_layer_round(results, local_round_, round_, config_.client_id, config_.local_rounds,
                                 config_.mid_min_fit);
  if (outcome.error) {
    phase_ = Phase::idle;
    out.send({config_.client_id, config_.parent_id, round_, std::move(*outcome.error)});
  } else if (outcome.rebroadcast) {
    current_ = std::move(*outcome.rebroadcast);
    ++local_round_;
    start_local_round(now, out);
  } else {
    phase_ = Phase::idle;
    out.send({config_.client_id, config_.parent_id, round_, std::move(*outcome.upward)});
  }
}

void MidAggregatorNode::finish_eval(Outbox& out) {
  deadline_timer_ = 0;
  phase_ = Phase::idle;
  if (evals_.empty()) {
    out.send({config_.client_id, config_.parent_id, round_,
              error_msg(Errc::round_abort, config_.client_id + " received no evaluation results")});
    return;
  }
  std::vector<std::pair<std::string, EvalMetrics>> evals;
  for (const auto& [id, r] : evals_) evals.emplace_back(id, r.metrics);
  const auto agg = aggregate_evaluate(evals);
  out.send({config_.client_id, config_.parent_id, round_,
            EvalResult{config_.client_id, EvalMetrics{agg.aggregated_eval_loss, agg.global_accuracy, agg.num_samples},
                       0, evals_.size()}});
}

}  // namespace fedtopo
