// Copyright 2026 The fedtopo Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "fedtopo/model.hpp"
#include "fedtopo/strategy.hpp"

namespace fedtopo {

enum class MsgType {
  JOIN,
  JOIN_ACK,
  FIT_INSTRUCT,
  FIT_RESULT,
  EVAL_INSTRUCT,
  EVAL_RESULT,
  MODEL_BROADCAST,
  RING_PASS,
  ROUND_DONE,
  SHUTDOWN,
  ERROR,
};

std::string_view to_string(MsgType t);
// Throws protocol error for unknown names.
MsgType msg_type_from_string(std::string_view name);

struct JoinMsg {
  std::uint64_t num_samples_hint = 0;
  std::uint64_t leaf_count = 1;
  bool operator==(const JoinMsg&) const = default;
};

struct JoinAckMsg {
  bool accepted = true;
  std::uint64_t leaf_count = 1;  // echo of the acknowledged JOIN
  bool operator==(const JoinAckMsg&) const = default;
};

struct EvalInstruction {
  bool clustered = false;
  std::vector<ModelParams> params;
  std::int64_t deadline_ms = 0;
  bool operator==(const EvalInstruction&) const = default;
};

struct EvalResult {
  std::string client_id;
  EvalMetrics metrics;
  std::uint32_t cluster_id = 0;
  std::uint64_t leaf_count = 1;
  bool operator==(const EvalResult&) const = default;
};

struct ModelBroadcastMsg {
  std::vector<ModelParams> params;
  bool operator==(const ModelBroadcastMsg&) const = default;
};

struct RingPassMsg {
  std::uint64_t pass = 0;  // passes already applied to `params`
  ModelParams params;
  std::vector<std::string> trace;
  double train_loss = 0.0;
  bool operator==(const RingPassMsg&) const = default;
};

struct RoundDoneMsg {
  bool operator==(const RoundDoneMsg&) const = default;
};

struct ShutdownMsg {
  bool operator==(const ShutdownMsg&) const = default;
};

struct ErrorMsg {
  std::string code;
  std::string message;
  bool operator==(const ErrorMsg&) const = default;
};

// Alternative order matches MsgType.
using Payload = std::variant<JoinMsg, JoinAckMsg, FitInstruction, FitResult, EvalInstruction,
                             EvalResult, ModelBroadcastMsg, RingPassMsg, RoundDoneMsg, ShutdownMsg,
                             ErrorMsg>;

struct Envelope {
  std::string sender;
  std::string receiver;
  std::uint64_t round = 0;
  Payload payload;

  MsgType msg_type() const noexcept { return static_cast<MsgType>(payload.index()); }
  bool operator==(const Envelope&) const = default;
};

}  // namespace fedtopo
