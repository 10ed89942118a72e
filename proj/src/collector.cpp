// Copyright 2026 The fedtopo Authors
// SPDX-License-Identifier: Apache-2.0

#include "fedtopo/collector.hpp"

#include <algorithm>
#include <cmath>

#include "fedtopo/error.hpp"
#include "fedtopo/rng.hpp"

namespace fedtopo {

namespace {

constexpr std::uint64_t kEvalSalt = 0xE;

bool is_clustered(const CollectorConfig& c) { return c.topology.kind == TopologyKind::clustered; }

std::string client_scope(const std::string& id) { return "client:" + id; }
std::string cluster_scope(std::size_t k) { return "cluster:" + std::to_string(k); }

}  // namespace

std::string_view to_string(RoundPhase p) {
  switch (p) {
    case RoundPhase::waiting_clients: return "waiting_clients";
    case RoundPhase::fitting: return "fitting";
    case RoundPhase::aggregating: return "aggregating";
    case RoundPhase::evaluating: return "evaluating";
    case RoundPhase::done: return "done";
    case RoundPhase::aborted: return "aborted";
  }
  return "aborted";
}

std::vector<std::string> validate_collector_config(const CollectorConfig& c) {
  std::vector<std::string> errors = validate_strategy(c.strategy);
  if (c.total_rounds < 1) errors.emplace_back("total_rounds must be >= 1");
  if (c.join_timeout_ms <= 0) errors.emplace_back("join_timeout_ms must be > 0");
  if (is_clustered(c) && c.strategy.num_clusters != c.topology.cluster_count) {
    errors.emplace_back("strategy num_clusters does not match the topology");
  }
  if (!is_clustered(c) && c.strategy.num_clusters != 1) {
    errors.emplace_back("num_clusters > 1 requires the clustered topology");
  }
  return errors;
}

CollectorNode::CollectorNode(CollectorConfig config, Repository* repo)
    : id_(kCollectorId), config_(std::move(config)), repo_(repo) {
  if (auto errors = validate_collector_config(config_); !errors.empty()) {
    throw Error(Errc::configuration, errors.front());
  }
  check_spec(config_.model_spec);
  for (auto& child : config_.topology.children_of(id_)) children_.insert(std::move(child));
  const std::size_t k = is_clustered(config_) ? config_.strategy.num_clusters : 1;
  for (std::size_t i = 0; i < k; ++i) models_.push_back(init_model(config_.model_spec, config_.run_seed + i));
  summary_.run_id = config_.run_id;
}

std::uint64_t CollectorNode::arm(TimeMs at, Outbox& out) {
  const std::uint64_t id = next_timer_++;
  out.set_timer(at, id);
  return id;
}

std::vector<std::string> CollectorNode::eligible() const {
  std::vector<std::string> out;
  for (const auto& [id, h] : registry_) {
    if (!config_.strategy.blacklist.contains(id)) out.push_back(id);
  }
  return out;
}

std::uint64_t CollectorNode::eligible_leaves() const {
  std::uint64_t n = 0;
  for (const auto& id : eligible()) n += registry_.at(id).leaf_count;
  return n;
}

void CollectorNode::on_start(TimeMs now, Outbox& out) {
  join_timer_ = arm(now + config_.join_timeout_ms, out);
}

void CollectorNode::on_message(const Envelope& env, TimeMs now, Outbox& out) {
  if (status_ != NodeStatus::running) return;
  switch (env.msg_type()) {
    case MsgType::JOIN: {
      const auto& join = std::get<JoinMsg>(env.payload);
      if (!children_.contains(env.sender)) {
        out.send({id_, env.sender, 0, ErrorMsg{std::string(to_string(Errc::topology)), "unknown node"}});
        return;
      }
      known_.insert(env.sender);
      const bool accepted = !config_.strategy.blacklist.contains(env.sender);
      if (accepted) {
        registry_[env.sender] = ClientHandle{env.sender, join.num_samples_hint,
                                             static_cast<std::uint64_t>(now), join.leaf_count};
      }
      out.send({id_, env.sender, state_.round, JoinAckMsg{accepted, join.leaf_count}});
      maybe_start(now, out);
      return;
    }
    case MsgType::FIT_RESULT:
      on_fit_result(env, std::get<FitResult>(env.payload), now, out);
      return;
    case MsgType::EVAL_RESULT:
      on_eval_result(env, std::get<EvalResult>(env.payload), now, out);
      return;
    case MsgType::ERROR: {
      if (env.round != state_.round) return;
      if (state_.phase == RoundPhase::fitting &&
          std::find(state_.sampled.begin(), state_.sampled.end(), env.sender) != state_.sampled.end() &&
          !state_.received.contains(env.sender)) {
        state_.failed.insert(env.sender);
        if (state_.received.size() + state_.failed.size() == state_.sampled.size()) finish_fit(now, out);
      } else if (state_.phase == RoundPhase::evaluating &&
                 std::find(state_.eval_sampled.begin(), state_.eval_sampled.end(), env.sender) !=
                     state_.eval_sampled.end() &&
                 !state_.eval_received.contains(env.sender)) {
        state_.eval_failed.insert(env.sender);
        if (state_.eval_received.size() + state_.eval_failed.size() == state_.eval_sampled.size()) {
          finish_eval(now, out);
        }
      }
      return;
    }
    default:
      return;
  }
}

void CollectorNode::on_timer(std::uint64_t timer_id, TimeMs now, Outbox& out) {
  if (status_ != NodeStatus::running) return;
  if (timer_id == join_timer_) {
    join_timer_ = 0;
    if (state_.round == 0) {
      end_run(RunStatus::aborted,
              "startup failure: " + std::to_string(eligible_leaves()) + " of " +
                  std::to_string(config_.strategy.min_available_clients) + " clients joined",
              out);
    }
    return;
  }
  if (timer_id != deadline_timer_) return;
  deadline_timer_ = 0;
  if (state_.phase == RoundPhase::fitting) {
    finish_fit(now, out);
  } else if (state_.phase == RoundPhase::evaluating) {
    finish_eval(now, out);
  }
}

void CollectorNode::maybe_start(TimeMs now, Outbox& out) {
  if (state_.round != 0 || eligible_leaves() < config_.strategy.min_available_clients) return;
  join_timer_ = 0;
  start_round(1, 0, now, out);
}

TimeMs CollectorNode::round_span() const {
  const TimeMs t = config_.strategy.round_timeout_ms;
  switch (config_.topology.kind) {
    case TopologyKind::hierarchical:
    case TopologyKind::star_ring:
      return t * static_cast<TimeMs>(1 + config_.topology.local_rounds);
    default:
      return t;
  }
}

void CollectorNode::start_round(std::uint64_t round, std::uint32_t attempt, TimeMs now, Outbox& out) {
  state_ = RoundState{};
  state_.round = round;
  state_.attempt = attempt;
  state_.phase = RoundPhase::fitting;
  state_.started_ms = now;
  state_.deadline_ms = now + round_span();

  const auto ids = eligible();
  const auto kind = config_.topology.kind;
  if (kind == TopologyKind::centralized || kind == TopologyKind::clustered) {
    std::vector<ClientHandle> handles;
    for (const auto& id : ids) handles.push_back(registry_.at(id));
    try {
      for (auto& h : sample_clients(handles, config_.strategy.fit_fraction, config_.strategy.min_fit_clients,
                                    config_.strategy.blacklist, mix64(config_.run_seed, round, attempt))) {
        state_.sampled.push_back(std::move(h.client_id));
      }
    } catch (const Error& e) {
      if (e.code() != Errc::insufficient_clients) throw;
      // Nobody to instruct; the deadline turns this into an under-quorum attempt.
    }
  } else {
    state_.sampled = ids;
  }

  Hyperparams hyper = config_.hyper;
  hyper.seed = config_.run_seed;
  for (const auto& id : state_.sampled) {
    FitInstruction fit{round, round, is_clustered(config_), models_, hyper, state_.deadline_ms, {}};
    if (kind == TopologyKind::star_ring) {
      if (auto g = config_.topology.ring_of(id)) {
        for (const auto& m : config_.topology.ring_order.at(*g)) {
          if (std::find(state_.sampled.begin(), state_.sampled.end(), m) != state_.sampled.end()) {
            fit.live.push_back(m);
          }
        }
      }
    }
    out.send({id_, id, round, std::move(fit)});
  }
  deadline_timer_ = arm(state_.deadline_ms, out);
}

void CollectorNode::on_fit_result(const Envelope& env, const FitResult& result, TimeMs now, Outbox& out) {
  if (state_.phase != RoundPhase::fitting || env.round != state_.round) return;  // stale
  const auto& id = env.sender;
  if (std::find(state_.sampled.begin(), state_.sampled.end(), id) == state_.sampled.end()) return;
  if (state_.received.contains(id) || state_.failed.contains(id)) return;
  bool ok = result.cluster_id < models_.size() && result.num_samples > 0;
  if (ok) {
    try {
      check_params(config_.model_spec, result.params);
    } catch (const Error&) {
      ok = false;
    }
  }
  if (ok) {
    FitResult r = result;
    r.client_id = id;
    state_.received.emplace(id, std::move(r));
  } else {
    state_.failed.insert(id);
  }
  if (state_.received.size() + state_.failed.size() == state_.sampled.size()) finish_fit(now, out);
}

void CollectorNode::finish_fit(TimeMs now, Outbox& out) {
  deadline_timer_ = 0;
  state_.phase = RoundPhase::aggregating;
  std::uint64_t leaves = 0;
  for (const auto& [id, r] : state_.received) leaves += r.leaf_count;
  const std::uint64_t round = state_.round;

  if (state_.received.empty() || leaves < config_.strategy.min_fit_clients) {
    state_.phase = RoundPhase::aborted;
    history_.push_back(state_);
    if (state_.attempt == 0) {
      start_round(round, 1, now, out);
    } else {
      end_run(RunStatus::aborted,
              "round " + std::to_string(round) + " under quorum: " + std::to_string(leaves) + " of " +
                  std::to_string(config_.strategy.min_fit_clients) + " results",
              out);
    }
    return;
  }

  std::vector<FitResult> results;
  for (const auto& [id, r] : state_.received) results.push_back(r);
  if (is_clustered(config_)) {
    models_ = ifca_aggregate(models_, results);
  } else {
    models_ = {fedavg_aggregate(results)};
  }

  for (const auto& [id, r] : state_.received) {
    emit(round, client_scope(id), "train_loss", r.train_metrics.train_loss);
  }
  emit(round, "global", "participants", static_cast<double>(leaves));
  if (is_clustered(config_)) {
    std::vector<std::uint64_t> per(models_.size(), 0);
    for (const auto& [id, r] : state_.received) per[r.cluster_id] += r.leaf_count;
    for (std::size_t k = 0; k < per.size(); ++k) emit(round, cluster_scope(k), "participants", double(per[k]));
  }
  start_eval(now, out);
}

void CollectorNode::start_eval(TimeMs now, Outbox& out) {
  state_.phase = RoundPhase::evaluating;
  std::vector<ClientHandle> handles;
  for (const auto& id : eligible()) handles.push_back(registry_.at(id));
  try {
    for (auto& h : sample_clients(handles, config_.strategy.eval_fraction, 1, config_.strategy.blacklist,
                                  mix64(config_.run_seed, state_.round, kEvalSalt))) {
      state_.eval_sampled.push_back(std::move(h.client_id));
    }
  } catch (const Error& e) {
    if (e.code() != Errc::insufficient_clients) throw;
  }
  if (state_.eval_sampled.empty()) {
    finish_eval(now, out);
    return;
  }
  const TimeMs span = config_.strategy.round_timeout_ms *
                      (config_.topology.kind == TopologyKind::hierarchical ? 2 : 1);
  state_.deadline_ms = now + span;
  for (const auto& id : state_.eval_sampled) {
    out.send({id_, id, state_.round, EvalInstruction{is_clustered(config_), models_, state_.deadline_ms}});
  }
  deadline_timer_ = arm(state_.deadline_ms, out);
}

void CollectorNode::on_eval_result(const Envelope& env, const EvalResult& result, TimeMs now, Outbox& out) {
  if (state_.phase != RoundPhase::evaluating || env.round != state_.round) return;
  const auto& id = env.sender;
  if (std::find(state_.eval_sampled.begin(), state_.eval_sampled.end(), id) == state_.eval_sampled.end()) return;
  if (state_.eval_received.contains(id) || state_.eval_failed.contains(id)) return;
  const auto& m = result.metrics;
  if (result.cluster_id < models_.size() && m.num_samples > 0 && std::isfinite(m.eval_loss) &&
      std::isfinite(m.accuracy)) {
    EvalResult r = result;
    r.client_id = id;
    state_.eval_received.emplace(id, std::move(r));
  } else {
    state_.eval_failed.insert(id);
  }
  if (state_.eval_received.size() + state_.eval_failed.size() == state_.eval_sampled.size()) {
    finish_eval(now, out);
  }
}

void CollectorNode::finish_eval(TimeMs now, Outbox& out) {
  deadline_timer_ = 0;
  const std::uint64_t round = state_.round;
  const bool clustered = is_clustered(config_);

  std::vector<std::pair<std::string, EvalMetrics>> evals;
  for (const auto& [id, r] : state_.eval_received) {
    emit(round, client_scope(id), "eval_loss", r.metrics.eval_loss);
    emit(round, client_scope(id), "accuracy", r.metrics.accuracy);
    evals.emplace_back(id, r.metrics);
  }

  if (clustered) {
    for (std::size_t k = 0; k < models_.size(); ++k) {
      std::vector<std::pair<std::string, EvalMetrics>> mine;
      for (const auto& [id, r] : state_.eval_received) {
        if (r.cluster_id == k) mine.emplace_back(id, r.metrics);
      }
      if (!mine.empty()) {
        const auto agg = aggregate_evaluate(mine);
        emit(round, cluster_scope(k), "aggregated_eval_loss", agg.aggregated_eval_loss);
        emit(round, cluster_scope(k), "accuracy", agg.global_accuracy);
      }
      if (config_.holdout && !config_.holdout->empty()) {
        emit(round, cluster_scope(k), "eval_loss",
             evaluate_model(config_.model_spec, models_[k], *config_.holdout).eval_loss);
      }
    }
  }

  std::optional<EvalMetrics> holdout;
  if (!clustered && config_.holdout && !config_.holdout->empty()) {
    holdout = evaluate_model(config_.model_spec, models_.front(), *config_.holdout);
  }
  if (!evals.empty()) {
    const auto agg = aggregate_evaluate(evals);
    emit(round, "global", "aggregated_eval_loss", agg.aggregated_eval_loss);
    emit(round, "global", "eval_loss", holdout ? holdout->eval_loss : agg.aggregated_eval_loss);
    emit(round, "global", "global_accuracy", agg.global_accuracy);
    summary_.final_accuracy = agg.global_accuracy;
  } else if (holdout) {
    emit(round, "global", "eval_loss", holdout->eval_loss);
  }
  if (holdout) emit(round, "global", "accuracy", holdout->accuracy);
  emit(round, "global", "duration_ms", static_cast<double>(now - state_.started_ms));

  state_.phase = RoundPhase::done;
  history_.push_back(state_);
  summary_.rounds_completed = round;

  if (repo_ && config_.checkpoint_every > 0 && round % config_.checkpoint_every == 0) {
    try {
      repo_->store_artifact(config_.run_id, round, models_);
    } catch (const Error&) {
      summary_.persisted = false;
    }
  }
  for (const auto& id : eligible()) out.send({id_, id, round, RoundDoneMsg{}});

  if (round >= config_.total_rounds) {
    end_run(RunStatus::done, {}, out);
  } else {
    start_round(round + 1, 0, now, out);
  }
}

void CollectorNode::emit(std::uint64_t round, std::string scope, std::string metric, double value) {
  // A diverged model can produce non-finite losses; those are not recordable.
  if (!std::isfinite(value)) return;
  MetricRecord rec{config_.run_id, round, std::move(scope), std::move(metric), value};
  if (repo_ && summary_.persisted) {
    try {
      repo_->append_metric(rec);
    } catch (const Error&) {
      summary_.persisted = false;
    }
  }
  metrics_.push_back(std::move(rec));
}

void CollectorNode::end_run(RunStatus status, std::string error, Outbox& out) {
  const std::uint64_t round = state_.round;
  if (status == RunStatus::done) {
    for (const auto& id : eligible()) out.send({id_, id, round, ModelBroadcastMsg{models_}});
  }
  for (const auto& id : known_) out.send({id_, id, round, ShutdownMsg{}});
  if (status != RunStatus::done && state_.phase != RoundPhase::aborted) {
    state_.phase = RoundPhase::aborted;
  }
  summary_.status = status;
  summary_.error = std::move(error);
  status_ = NodeStatus::completed;
  finalize_run();
}

void CollectorNode::finalize_run() {
  if (!repo_) return;
  try {
    repo_->store_final(config_.run_id, models_);
  } catch (const Error&) {
    summary_.persisted = false;
  }
  try {
    repo_->finish_run(config_.run_id, summary_.status, summary_.rounds_completed, summary_.final_accuracy);
  } catch (const Error&) {
    summary_.persisted = false;
  }
}

}  // namespace fedtopo
