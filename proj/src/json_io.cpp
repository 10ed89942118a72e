// Copyright 2026 The fedtopo Authors
// SPDX-License-Identifier: Apache-2.0

#include "fedtopo/json_io.hpp"

#include <cmath>

#include "fedtopo/error.hpp"

namespace fedtopo {

namespace jsonio {

const Json& field(const Json& obj, const char* key) {
  if (!obj.is_object()) throw Error(Errc::protocol, std::string("expected object holding '") + key + "'");
  auto it = obj.find(key);
  if (it == obj.end()) throw Error(Errc::protocol, std::string("missing field '") + key + "'");
  return *it;
}

std::uint64_t get_u64(const Json& obj, const char* key) {
  const Json& v = field(obj, key);
  if (!v.is_number_integer() || (!v.is_number_unsigned() && v.get<std::int64_t>() < 0)) {
    throw Error(Errc::protocol, std::string("field '") + key + "' must be a non-negative integer");
  }
  return v.get<std::uint64_t>();
}

std::int64_t get_i64(const Json& obj, const char* key) {
  const Json& v = field(obj, key);
  if (!v.is_number_integer()) throw Error(Errc::protocol, std::string("field '") + key + "' must be an integer");
  return v.get<std::int64_t>();
}

double get_f64(const Json& obj, const char* key) {
  const Json& v = field(obj, key);
  if (!v.is_number()) throw Error(Errc::protocol, std::string("field '") + key + "' must be a number");
  const double d = v.get<double>();
  if (!std::isfinite(d)) throw Error(Errc::protocol, std::string("field '") + key + "' is not finite");
  return d;
}

bool get_bool(const Json& obj, const char* key) {
  const Json& v = field(obj, key);
  if (!v.is_boolean()) throw Error(Errc::protocol, std::string("field '") + key + "' must be a boolean");
  return v.get<bool>();
}

std::string get_str(const Json& obj, const char* key) {
  const Json& v = field(obj, key);
  if (!v.is_string()) throw Error(Errc::protocol, std::string("field '") + key + "' must be a string");
  return v.get<std::string>();
}

std::vector<std::string> get_str_list(const Json& obj, const char* key) {
  const Json& v = field(obj, key);
  if (!v.is_array()) throw Error(Errc::protocol, std::string("field '") + key + "' must be a list");
  std::vector<std::string> out;
  for (const auto& e : v) {
    if (!e.is_string()) throw Error(Errc::protocol, std::string("field '") + key + "' must hold strings");
    out.push_back(e.get<std::string>());
  }
  return out;
}

Json number(double v) {
  if (!std::isfinite(v)) throw Error(Errc::validation, "refusing to encode a non-finite number");
  return Json(v);
}

}  // namespace jsonio

using namespace jsonio;

namespace {

Json params_list(const std::vector<ModelParams>& list) {
  Json arr = Json::array();
  for (const auto& p : list) arr.push_back(to_json(p));
  return arr;
}

std::vector<ModelParams> params_list_from(const Json& obj, const char* key) {
  const Json& v = field(obj, key);
  if (!v.is_array()) throw Error(Errc::protocol, std::string("field '") + key + "' must be a list");
  std::vector<ModelParams> out;
  for (const auto& e : v) out.push_back(model_params_from_json(e));
  return out;
}

Json train_metrics_json(const TrainMetrics& m) {
  return Json{{"train_loss", number(m.train_loss)},
              {"num_samples", m.num_samples},
              {"duration_ms", m.duration_ms}};
}

TrainMetrics train_metrics_from(const Json& j) {
  return {get_f64(j, "train_loss"), get_u64(j, "num_samples"), get_i64(j, "duration_ms")};
}

Json eval_metrics_json(const EvalMetrics& m) {
  return Json{{"eval_loss", number(m.eval_loss)},
              {"accuracy", number(m.accuracy)},
              {"num_samples", m.num_samples}};
}

EvalMetrics eval_metrics_from(const Json& j) {
  return {get_f64(j, "eval_loss"), get_f64(j, "accuracy"), get_u64(j, "num_samples")};
}

Json str_list(const std::vector<std::string>& v) {
  Json arr = Json::array();
  for (const auto& s : v) arr.push_back(s);
  return arr;
}

std::uint32_t get_u32(const Json& obj, const char* key) {
  const std::uint64_t v = get_u64(obj, key);
  if (v > UINT32_MAX) throw Error(Errc::protocol, std::string("field '") + key + "' out of range");
  return static_cast<std::uint32_t>(v);
}

struct PayloadWriter {
  Json operator()(const JoinMsg& m) const {
    return {{"num_samples_hint", m.num_samples_hint}, {"leaf_count", m.leaf_count}};
  }
  Json operator()(const JoinAckMsg& m) const {
    return {{"accepted", m.accepted}, {"leaf_count", m.leaf_count}};
  }
  Json operator()(const FitInstruction& m) const {
    return {{"round", m.round},
            {"step", m.step},
            {"clustered", m.clustered},
            {"params", params_list(m.params)},
            {"hyper", to_json(m.hyper)},
            {"deadline_ms", m.deadline_ms},
            {"live", str_list(m.live)}};
  }
  Json operator()(const FitResult& m) const {
    return {{"client_id", m.client_id},
            {"step", m.step},
            {"params", to_json(m.params)},
            {"num_samples", m.num_samples},
            {"train_metrics", train_metrics_json(m.train_metrics)},
            {"cluster_id", m.cluster_id},
            {"leaf_count", m.leaf_count},
            {"trace", str_list(m.trace)}};
  }
  Json operator()(const EvalInstruction& m) const {
    return {{"clustered", m.clustered}, {"params", params_list(m.params)}, {"deadline_ms", m.deadline_ms}};
  }
  Json operator()(const EvalResult& m) const {
    return {{"client_id", m.client_id},
            {"metrics", eval_metrics_json(m.metrics)},
            {"cluster_id", m.cluster_id},
            {"leaf_count", m.leaf_count}};
  }
  Json operator()(const ModelBroadcastMsg& m) const { return {{"params", params_list(m.params)}}; }
  Json operator()(const RingPassMsg& m) const {
    return {{"pass", m.pass},
            {"params", to_json(m.params)},
            {"trace", str_list(m.trace)},
            {"train_loss", number(m.train_loss)}};
  }
  Json operator()(const RoundDoneMsg&) const { return Json::object(); }
  Json operator()(const ShutdownMsg&) const { return Json::object(); }
  Json operator()(const ErrorMsg& m) const { return {{"code", m.code}, {"message", m.message}}; }
};

Payload payload_from(MsgType type, const Json& j) {
  if (!j.is_object()) throw Error(Errc::protocol, "payload must be an object");
  switch (type) {
    case MsgType::JOIN:
      return JoinMsg{get_u64(j, "num_samples_hint"), get_u64(j, "leaf_count")};
    case MsgType::JOIN_ACK:
      return JoinAckMsg{get_bool(j, "accepted"), get_u64(j, "leaf_count")};
    case MsgType::FIT_INSTRUCT: {
      FitInstruction m;
      m.round = get_u64(j, "round");
      m.step = get_u64(j, "step");
      m.clustered = get_bool(j, "clustered");
      m.params = params_list_from(j, "params");
      m.hyper = hyperparams_from_json(field(j, "hyper"));
      m.deadline_ms = get_i64(j, "deadline_ms");
      m.live = get_str_list(j, "live");
      return m;
    }
    case MsgType::FIT_RESULT: {
      FitResult m;
      m.client_id = get_str(j, "client_id");
      m.step = get_u64(j, "step");
      m.params = model_params_from_json(field(j, "params"));
      m.num_samples = get_u64(j, "num_samples");
      m.train_metrics = train_metrics_from(field(j, "train_metrics"));
      m.cluster_id = get_u32(j, "cluster_id");
      m.leaf_count = get_u64(j, "leaf_count");
      m.trace = get_str_list(j, "trace");
      return m;
    }
    case MsgType::EVAL_INSTRUCT:
      return EvalInstruction{get_bool(j, "clustered"), params_list_from(j, "params"),
                             get_i64(j, "deadline_ms")};
    case MsgType::EVAL_RESULT:
      return EvalResult{get_str(j, "client_id"), eval_metrics_from(field(j, "metrics")),
                        get_u32(j, "cluster_id"), get_u64(j, "leaf_count")};
    case MsgType::MODEL_BROADCAST:
      return ModelBroadcastMsg{params_list_from(j, "params")};
    case MsgType::RING_PASS:
      return RingPassMsg{get_u64(j, "pass"), model_params_from_json(field(j, "params")),
                         get_str_list(j, "trace"), get_f64(j, "train_loss")};
    case MsgType::ROUND_DONE:
      return RoundDoneMsg{};
    case MsgType::SHUTDOWN:
      return ShutdownMsg{};
    case MsgType::ERROR:
      return ErrorMsg{get_str(j, "code"), get_str(j, "message")};
  }
  throw Error(Errc::protocol, "unhandled message type");
}

}  // namespace

Json to_json(const ModelParams& p) {
  Json layers = Json::array();
  for (const auto& t : p.layers) {
    Json values = Json::array();
    for (double v : t.values) values.push_back(number(v));
    layers.push_back(Json{{"rows", t.rows}, {"cols", t.cols}, {"values", std::move(values)}});
  }
  return Json{{"spec_hash", p.spec_hash}, {"layers", std::move(layers)}};
}

ModelParams model_params_from_json(const Json& j) {
  ModelParams p;
  p.spec_hash = get_u64(j, "spec_hash");
  const Json& layers = field(j, "layers");
  if (!layers.is_array()) throw Error(Errc::protocol, "layers must be a list");
  for (const auto& l : layers) {
    Tensor t;
    t.rows = get_u64(l, "rows");
    t.cols = get_u64(l, "cols");
    const Json& values = field(l, "values");
    if (!values.is_array()) throw Error(Errc::protocol, "layer values must be a list");
    t.values.reserve(values.size());
    for (const auto& v : values) {
      if (!v.is_number()) throw Error(Errc::protocol, "layer values must be numbers");
      const double d = v.get<double>();
      if (!std::isfinite(d)) throw Error(Errc::protocol, "non-finite layer value");
      t.values.push_back(d);
    }
    if (t.values.size() != t.rows * t.cols) {
      throw Error(Errc::protocol, "layer value count does not match its shape");
    }
    p.layers.push_back(std::move(t));
  }
  return p;
}

Json to_json(const Hyperparams& h) {
  return Json{{"learning_rate", number(h.learning_rate)},
              {"local_epochs", h.local_epochs},
              {"batch_size", h.batch_size},
              {"seed", h.seed}};
}

Hyperparams hyperparams_from_json(const Json& j) {
  Hyperparams h;
  h.learning_rate = get_f64(j, "learning_rate");
  h.local_epochs = get_u32(j, "local_epochs");
  h.batch_size = get_u32(j, "batch_size");
  h.seed = get_u64(j, "seed");
  return h;
}

Json to_json(const Envelope& env) {
  return Json{{"msg_type", std::string(to_string(env.msg_type()))},
              {"sender", env.sender},
              {"receiver", env.receiver},
              {"round", env.round},
              {"payload", std::visit(PayloadWriter{}, env.payload)}};
}

Envelope envelope_from_json(const Json& j) {
  Envelope env;
  const MsgType type = msg_type_from_string(get_str(j, "msg_type"));
  env.sender = get_str(j, "sender");
  env.receiver = get_str(j, "receiver");
  env.round = get_u64(j, "round");
  env.payload = payload_from(type, field(j, "payload"));
  return env;
}

std::string canonical_dump(const Json& j) {
  return j.dump(-1, ' ', false, Json::error_handler_t::strict);
}

std::string_view to_string(MsgType t) {
  switch (t) {
    case MsgType::JOIN: return "JOIN";
    case MsgType::JOIN_ACK: return "JOIN_ACK";
    case MsgType::FIT_INSTRUCT: return "FIT_INSTRUCT";
    case MsgType::FIT_RESULT: return "FIT_RESULT";
    case MsgType::EVAL_INSTRUCT: return "EVAL_INSTRUCT";
    case MsgType::EVAL_RESULT: return "EVAL_RESULT";
    case MsgType::MODEL_BROADCAST: return "MODEL_BROADCAST";
    case MsgType::RING_PASS: return "RING_PASS";
    case MsgType::ROUND_DONE: return "ROUND_DONE";
    case MsgType::SHUTDOWN: return "SHUTDOWN";
    case MsgType::ERROR: return "ERROR";
  }
  return "UNKNOWN";
}

MsgType msg_type_from_string(std::string_view name) {
  for (int i = 0; i <= static_cast<int>(MsgType::ERROR); ++i) {
    const auto t = static_cast<MsgType>(i);
    if (to_string(t) == name) return t;
  }
  throw Error(Errc::protocol, "unknown msg_type '" + std::string(name) + "'");
}

}  // namespace fedtopo
