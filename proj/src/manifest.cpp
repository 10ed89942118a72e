// Copyright 2026 The fedtopo Authors
// SPDX-License-Identifier: Apache-2.0

#include "fedtopo/manifest.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>

#include "fedtopo/error.hpp"
#include "fedtopo/repository.hpp"
#include "fedtopo/rng.hpp"

namespace fedtopo {

namespace {

using namespace jsonio;

// Read access to one manifest object that remembers which keys were used,
// so typos surface as unknown-key errors instead of silent defaults.
class Section {
 private:
  template <typename F>
  decltype(auto) wrap(F&& f) const {
    try {
      return f();
    } catch (const Error& e) {
      if (e.code() != Errc::protocol) throw;
      fail(e.what());
    }
  }

 public:
  Section(const Json& obj, std::string path) : obj_(obj), path_(std::move(path)) {
    if (!obj_.is_object()) fail("must be an object");
  }

  bool has(const char* key) {
    seen_.insert(key);
    return obj_.contains(key);
  }
  const Json& at(const char* key) {
    seen_.insert(key);
    return wrap([&]() -> const Json& { return field(obj_, key); });
  }
  Section child(const char* key) { return Section(at(key), name(key)); }

  std::uint64_t u64(const char* key) { return wrap([&] { seen_.insert(key); return get_u64(obj_, key); }); }
  std::uint64_t u64(const char* key, std::uint64_t fallback) { return has(key) ? u64(key) : fallback; }
  std::int64_t i64(const char* key, std::int64_t fallback) {
    return has(key) ? wrap([&] { return get_i64(obj_, key); }) : fallback;
  }
  double f64(const char* key, double fallback) {
    return has(key) ? wrap([&] { return get_f64(obj_, key); }) : fallback;
  }
  std::string str(const char* key) { return wrap([&] { seen_.insert(key); return get_str(obj_, key); }); }
  std::string str(const char* key, std::string fallback) { return has(key) ? str(key) : fallback; }
  std::vector<std::string> str_list(const char* key) {
    return has(key) ? wrap([&] { return get_str_list(obj_, key); }) : std::vector<std::string>{};
  }
  std::optional<std::uint64_t> opt_u64(const char* key) {
    if (!has(key)) return std::nullopt;
    return u64(key);
  }

  // Call after reading every field.
  void finish() const {
    for (const auto& [key, value] : obj_.items()) {
      if (!seen_.contains(key)) fail("unknown key '" + key + "'");
    }
  }

  [[noreturn]] void fail(const std::string& message) const {
    throw Error(Errc::configuration, (path_.empty() ? std::string("manifest") : path_) + ": " + message);
  }

  std::string name(const char* key) const { return path_.empty() ? key : path_ + "." + key; }

 private:
  const Json& obj_;
  std::string path_;
  std::set<std::string, std::less<>> seen_;
};

TopologyKind topology_kind_from(const std::string& s, const Section& sec) {
  if (s == "centralized") return TopologyKind::centralized;
  if (s == "clustered") return TopologyKind::clustered;
  if (s == "hierarchical") return TopologyKind::hierarchical;
  if (s == "star_ring") return TopologyKind::star_ring;
  sec.fail("unknown topology kind '" + s + "'");
}

std::string_view to_string(TopologyKind k) {
  switch (k) {
    case TopologyKind::centralized: return "centralized";
    case TopologyKind::clustered: return "clustered";
    case TopologyKind::hierarchical: return "hierarchical";
    case TopologyKind::star_ring: return "star_ring";
  }
  return "centralized";
}

std::string_view to_string(PartitionScheme s) {
  switch (s) {
    case PartitionScheme::iid: return "iid";
    case PartitionScheme::label_shard: return "label_shard";
    case PartitionScheme::dirichlet: return "dirichlet";
    case PartitionScheme::cluster_flip: return "cluster_flip";
  }
  return "iid";
}

TopologySpec topology_from(Section s) {
  TopologySpec t;
  t.kind = topology_kind_from(s.str("kind"), s);
  t.num_clients = s.u64("num_clients");
  t.num_clusters = s.opt_u64("num_clusters");
  t.num_mid_aggregators = s.opt_u64("num_mid_aggregators");
  t.local_rounds = s.opt_u64("local_rounds");
  if (s.has("ring_groups")) {
    const Json& g = s.at("ring_groups");
    if (g.is_string()) {
      const std::string text = g.get<std::string>();
      std::size_t size = 0;
      const char* begin = text.data() + 5;
      const char* end = text.data() + text.size();
      if (!text.starts_with("auto:") || std::from_chars(begin, end, size).ptr != end || begin == end) {
        s.fail("ring_groups must be a list of groups or \"auto:<size>\"");
      }
      t.ring_groups = AutoRingGroups{size};
    } else if (g.is_array()) {
      std::vector<std::vector<std::string>> groups;
      for (const auto& group : g) {
        if (!group.is_array()) s.fail("ring_groups entries must be lists of client ids");
        auto& members = groups.emplace_back();
        for (const auto& id : group) {
          if (!id.is_string()) s.fail("ring_groups entries must be lists of client ids");
          members.push_back(id.get<std::string>());
        }
      }
      t.ring_groups = std::move(groups);
    } else {
      s.fail("ring_groups must be a list of groups or \"auto:<size>\"");
    }
  }
  s.finish();
  return t;
}

StrategyConfig strategy_from(Section s) {
  StrategyConfig c;
  c.min_available_clients = s.u64("min_available_clients", c.min_available_clients);
  c.min_fit_clients = s.u64("min_fit_clients", c.min_fit_clients);
  c.fit_fraction = s.f64("fit_fraction", c.fit_fraction);
  c.eval_fraction = s.f64("eval_fraction", c.eval_fraction);
  c.round_timeout_ms = s.i64("round_timeout_ms", c.round_timeout_ms);
  for (auto& id : s.str_list("blacklist")) c.blacklist.insert(std::move(id));
  c.num_clusters = s.u64("num_clusters", c.num_clusters);
  s.finish();
  return c;
}

ModelSpec model_from(Section s) {
  ModelSpec m;
  const std::string kind = s.str("kind");
  if (kind == "logreg") {
    m.kind = ModelKind::logreg;
  } else if (kind == "mlp") {
    m.kind = ModelKind::mlp;
  } else {
    s.fail("unknown model kind '" + kind + "'");
  }
  m.input_dim = s.u64("input_dim");
  m.num_classes = s.u64("num_classes");
  if (s.has("hidden_dims")) {
    const Json& h = s.at("hidden_dims");
    if (!h.is_array()) s.fail("hidden_dims must be a list");
    for (const auto& d : h) {
      if (!d.is_number_integer() || d.get<std::int64_t>() < 0) s.fail("hidden_dims must hold non-negative integers");
      m.hidden_dims.push_back(d.get<std::size_t>());
    }
  }
  s.finish();
  return m;
}

Hyperparams hyper_from(Section s) {
  Hyperparams h;
  h.learning_rate = s.f64("learning_rate", h.learning_rate);
  const auto epochs = s.u64("local_epochs", h.local_epochs);
  const auto batch = s.u64("batch_size", h.batch_size);
  if (epochs > UINT32_MAX || batch > UINT32_MAX) s.fail("local_epochs and batch_size must fit in 32 bits");
  h.local_epochs = static_cast<std::uint32_t>(epochs);
  h.batch_size = static_cast<std::uint32_t>(batch);
  s.finish();
  return h;
}

DataPlan data_from(Section s) {
  DataPlan d;
  {
    Section g = s.child("generator");
    const std::string kind = g.str("kind");
    if (kind == "linear") {
      d.generator.kind = SyntheticKind::linear;
    } else if (kind == "blobs") {
      d.generator.kind = SyntheticKind::blobs;
    } else {
      g.fail("unknown generator kind '" + kind + "'");
    }
    d.generator.num_samples = g.u64("num_samples");
    d.generator.input_dim = g.u64("input_dim");
    d.generator.num_classes = g.u64("num_classes");
    d.generator.seed = g.u64("seed");
    g.finish();
  }
  {
    Section p = s.child("partition");
    const std::string scheme = p.str("scheme");
    if (scheme == "iid") {
      d.partition.scheme = PartitionScheme::iid;
    } else if (scheme == "label_shard") {
      d.partition.scheme = PartitionScheme::label_shard;
    } else if (scheme == "dirichlet") {
      d.partition.scheme = PartitionScheme::dirichlet;
    } else if (scheme == "cluster_flip") {
      d.partition.scheme = PartitionScheme::cluster_flip;
    } else {
      p.fail("unknown partition scheme '" + scheme + "'");
    }
    d.partition.alpha = p.f64("alpha", 0.0);
    d.partition.shards_per_client = p.u64("shards_per_client", 0);
    d.partition.num_clusters = p.u64("num_clusters", 0);
    d.partition.seed = p.u64("seed", d.generator.seed);
    p.finish();
  }
  d.holdout_samples = s.u64("holdout_samples", 0);
  s.finish();
  return d;
}

FaultSpec fault_from(Section s) {
  FaultSpec f;
  f.target = s.str("target", "");
  if (s.has("link")) {
    const Json& l = s.at("link");
    if (!l.is_array() || l.size() != 2 || !l[0].is_string() || !l[1].is_string()) {
      s.fail("link must be a pair of node ids");
    }
    f.link = std::make_pair(l[0].get<std::string>(), l[1].get<std::string>());
  }
  f.drop_prob = s.f64("drop_prob", 0.0);
  f.latency_ms = s.i64("latency_ms", 0);
  f.disconnect_at_round = s.opt_u64("disconnect_at_round");
  f.reconnect_at_round = s.opt_u64("reconnect_at_round");
  s.finish();
  return f;
}

TransportSpec transport_from(Section s) {
  TransportSpec t;
  const std::string kind = s.str("kind", "inproc");
  if (kind == "inproc") {
    t.kind = TransportKind::inproc;
  } else if (kind == "socket") {
    t.kind = TransportKind::socket;
  } else {
    s.fail("unknown transport kind '" + kind + "'");
  }
  if (s.has("faults")) {
    const Json& faults = s.at("faults");
    if (!faults.is_array()) s.fail("faults must be a list");
    for (std::size_t i = 0; i < faults.size(); ++i) {
      t.faults.push_back(fault_from(Section(faults[i], s.name("faults") + "[" + std::to_string(i) + "]")));
    }
  }
  t.host = s.str("host", t.host);
  const auto port = s.u64("base_port", t.base_port);
  if (port > 65535) s.fail("base_port must be <= 65535");
  t.base_port = static_cast<std::uint32_t>(port);
  t.join_timeout_ms = s.i64("join_timeout_ms", t.join_timeout_ms);
  t.join_retry_ms = s.i64("join_retry_ms", t.join_retry_ms);
  s.finish();
  return t;
}

std::vector<std::string> prefixed(std::string_view prefix, std::vector<std::string> errors) {
  for (auto& e : errors) e = std::string(prefix) + e;
  return errors;
}

}  // namespace

RunManifest manifest_from_json(const Json& doc) {
  Section root(doc, "");
  RunManifest m;
  m.run_id = root.str("run_id");
  m.seed = root.u64("seed");
  m.total_rounds = root.u64("total_rounds");
  m.checkpoint_every = root.u64("checkpoint_every", 0);
  m.topology = topology_from(root.child("topology"));
  m.strategy = strategy_from(root.has("strategy") ? root.child("strategy") : Section(Json::object(), "strategy"));
  m.model = model_from(root.child("model"));
  m.hyper = root.has("hyper") ? hyper_from(root.child("hyper")) : Hyperparams{};
  m.hyper.seed = m.seed;
  m.data = data_from(root.child("data"));
  m.data.partition.num_clients = m.topology.num_clients;
  if (root.has("transport")) m.transport = transport_from(root.child("transport"));
  root.finish();
  return m;
}

Json to_json(const RunManifest& m) {
  Json topo{{"kind", std::string(to_string(m.topology.kind))}, {"num_clients", m.topology.num_clients}};
  if (m.topology.num_clusters) topo["num_clusters"] = *m.topology.num_clusters;
  if (m.topology.num_mid_aggregators) topo["num_mid_aggregators"] = *m.topology.num_mid_aggregators;
  if (m.topology.local_rounds) topo["local_rounds"] = *m.topology.local_rounds;
  if (m.topology.ring_groups) {
    if (const auto* a = std::get_if<AutoRingGroups>(&*m.topology.ring_groups)) {
      topo["ring_groups"] = "auto:" + std::to_string(a->group_size);
    } else {
      topo["ring_groups"] = std::get<std::vector<std::vector<std::string>>>(*m.topology.ring_groups);
    }
  }

  const auto& s = m.strategy;
  Json strategy{{"min_available_clients", s.min_available_clients},
                {"min_fit_clients", s.min_fit_clients},
                {"fit_fraction", number(s.fit_fraction)},
                {"eval_fraction", number(s.eval_fraction)},
                {"round_timeout_ms", s.round_timeout_ms},
                {"blacklist", std::vector<std::string>(s.blacklist.begin(), s.blacklist.end())},
                {"num_clusters", s.num_clusters}};

  Json model{{"kind", m.model.kind == ModelKind::logreg ? "logreg" : "mlp"},
             {"input_dim", m.model.input_dim},
             {"hidden_dims", m.model.hidden_dims},
             {"num_classes", m.model.num_classes}};

  Json hyper{{"learning_rate", number(m.hyper.learning_rate)},
             {"local_epochs", m.hyper.local_epochs},
             {"batch_size", m.hyper.batch_size}};

  const auto& g = m.data.generator;
  const auto& p = m.data.partition;
  Json partition{{"scheme", std::string(to_string(p.scheme))}, {"seed", p.seed}};
  if (p.scheme == PartitionScheme::dirichlet) partition["alpha"] = number(p.alpha);
  if (p.scheme == PartitionScheme::label_shard) partition["shards_per_client"] = p.shards_per_client;
  if (p.scheme == PartitionScheme::cluster_flip) partition["num_clusters"] = p.num_clusters;
  Json data{{"generator",
             {{"kind", g.kind == SyntheticKind::linear ? "linear" : "blobs"},
              {"num_samples", g.num_samples},
              {"input_dim", g.input_dim},
              {"num_classes", g.num_classes},
              {"seed", g.seed}}},
            {"partition", std::move(partition)},
            {"holdout_samples", m.data.holdout_samples}};

  Json faults = Json::array();
  for (const auto& f : m.transport.faults) {
    Json j{{"drop_prob", number(f.drop_prob)}, {"latency_ms", f.latency_ms}};
    if (!f.target.empty()) j["target"] = f.target;
    if (f.link) j["link"] = {f.link->first, f.link->second};
    if (f.disconnect_at_round) j["disconnect_at_round"] = *f.disconnect_at_round;
    if (f.reconnect_at_round) j["reconnect_at_round"] = *f.reconnect_at_round;
    faults.push_back(std::move(j));
  }
  Json transport{{"kind", m.transport.kind == TransportKind::inproc ? "inproc" : "socket"},
                 {"faults", std::move(faults)},
                 {"host", m.transport.host},
                 {"base_port", m.transport.base_port},
                 {"join_timeout_ms", m.transport.join_timeout_ms},
                 {"join_retry_ms", m.transport.join_retry_ms}};

  return Json{{"run_id", m.run_id},
              {"seed", m.seed},
              {"total_rounds", m.total_rounds},
              {"checkpoint_every", m.checkpoint_every},
              {"topology", std::move(topo)},
              {"strategy", std::move(strategy)},
              {"model", std::move(model)},
              {"hyper", std::move(hyper)},
              {"data", std::move(data)},
              {"transport", std::move(transport)}};
}

Json read_manifest_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::storage, "cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  try {
    return Json::parse(ss.str());
  } catch (const Json::exception& e) {
    throw Error(Errc::protocol, path.string() + ": " + e.what());
  }
}

void apply_override(Json& doc, std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos || eq == 0) {
    throw Error(Errc::configuration, "override '" + std::string(assignment) + "' is not key=value");
  }
  std::string key(assignment.substr(0, eq));
  const std::string text(assignment.substr(eq + 1));
  if (key == "training.rounds") {
    key = "total_rounds";
  } else if (key.starts_with("training.")) {
    key = "hyper." + key.substr(9);
  }

  Json value;
  try {
    value = Json::parse(text);
  } catch (const Json::exception&) {
    value = text;
  }

  Json* node = &doc;
  std::size_t start = 0;
  for (;;) {
    const auto dot = key.find('.', start);
    const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (part.empty()) throw Error(Errc::configuration, "override key '" + key + "' has an empty segment");
    if (!node->is_object()) throw Error(Errc::configuration, "override key '" + key + "' crosses a non-object");
    if (dot == std::string::npos) {
      (*node)[part] = std::move(value);
      return;
    }
    node = &(*node)[part];
    if (node->is_null()) *node = Json::object();
    start = dot + 1;
  }
}

std::string client_id(std::size_t index, std::size_t num_clients) {
  std::size_t width = 3;
  for (std::size_t n = num_clients > 0 ? num_clients - 1 : 0; n >= 1000; n /= 10) ++width;
  std::string digits = std::to_string(index);
  if (digits.size() < width) digits.insert(0, width - digits.size(), '0');
  return "client-" + digits;
}

std::vector<std::string> client_ids(std::size_t num_clients) {
  std::vector<std::string> ids;
  for (std::size_t i = 0; i < num_clients; ++i) ids.push_back(client_id(i, num_clients));
  return ids;
}

std::vector<std::string> validate_manifest(const RunManifest& m) {
  std::vector<std::string> errors;
  auto add = [&](std::vector<std::string> more) { errors.insert(errors.end(), more.begin(), more.end()); };

  if (!is_safe_run_id(m.run_id)) errors.emplace_back("run_id must be nonempty and filesystem-safe");
  if (m.total_rounds < 1) errors.emplace_back("total_rounds must be >= 1");

  add(prefixed("topology: ", validate_spec(m.topology)));
  add(prefixed("strategy: ", validate_strategy(m.strategy)));
  const std::size_t n = m.topology.num_clients;
  if (m.strategy.min_available_clients > n) errors.emplace_back("strategy: min_available_clients exceeds num_clients");
  if (m.topology.kind == TopologyKind::clustered) {
    if (m.topology.num_clusters && m.strategy.num_clusters != *m.topology.num_clusters) {
      errors.emplace_back("strategy: num_clusters does not match topology num_clusters");
    }
  } else if (m.strategy.num_clusters != 1) {
    errors.emplace_back("strategy: num_clusters > 1 requires the clustered topology");
  }

  try {
    check_spec(m.model);
  } catch (const Error& e) {
    errors.emplace_back(std::string("model: ") + e.what());
  }
  const auto& g = m.data.generator;
  if (m.model.input_dim != g.input_dim) errors.emplace_back("model input_dim does not match data input_dim");
  if (m.model.num_classes != g.num_classes) errors.emplace_back("model num_classes does not match data num_classes");
  if (g.input_dim < 1) errors.emplace_back("data: input_dim must be >= 1");
  if (g.num_classes < 2) errors.emplace_back("data: num_classes must be >= 2");
  if (g.num_samples < n) errors.emplace_back("data: fewer samples than clients");
  add(prefixed("data: ", validate_partition_spec(m.data.partition)));

  if (!(m.hyper.learning_rate >= 0.0 && std::isfinite(m.hyper.learning_rate))) {
    errors.emplace_back("hyper: learning_rate must be finite and >= 0");
  }
  if (m.hyper.local_epochs < 1) errors.emplace_back("hyper: local_epochs must be >= 1");
  if (m.hyper.batch_size < 1) errors.emplace_back("hyper: batch_size must be >= 1");

  std::set<std::string> nodes{kCollectorId};
  for (auto& id : client_ids(n)) nodes.insert(std::move(id));
  const std::size_t mids = m.topology.num_mid_aggregators.value_or(0);
  if (m.topology.kind == TopologyKind::hierarchical) {
    for (std::size_t j = 0; j < mids; ++j) nodes.insert(mid_aggregator_id(j));
  }
  for (const auto& id : m.strategy.blacklist) {
    if (!nodes.contains(id) || id == kCollectorId) errors.emplace_back("strategy: blacklist names unknown client " + id);
  }
  if (m.topology.ring_groups) {
    if (const auto* groups = std::get_if<std::vector<std::vector<std::string>>>(&*m.topology.ring_groups)) {
      for (const auto& group : *groups) {
        for (const auto& id : group) {
          if (!nodes.contains(id) || id == kCollectorId) {
            errors.emplace_back("topology: ring group names unknown client " + id);
          }
        }
      }
    }
  }
  for (std::size_t i = 0; i < m.transport.faults.size(); ++i) {
    const auto& f = m.transport.faults[i];
    const std::string where = "transport: fault " + std::to_string(i) + ": ";
    add(prefixed(where, validate_fault(f)));
    if (!f.target.empty() && f.target != kAnyClient && !nodes.contains(f.target)) {
      errors.emplace_back(where + "unknown target " + f.target);
    }
    if (f.link && (!nodes.contains(f.link->first) || !nodes.contains(f.link->second))) {
      errors.emplace_back(where + "link names an unknown node");
    }
  }
  if (m.transport.join_timeout_ms <= 0) errors.emplace_back("transport: join_timeout_ms must be > 0");
  if (m.transport.join_retry_ms <= 0) errors.emplace_back("transport: join_retry_ms must be > 0");
  if (m.transport.kind == TransportKind::socket && m.transport.base_port + 1 + n + mids > 65535) {
    errors.emplace_back("transport: port range exceeds 65535");
  }
  if (m.transport.kind == TransportKind::socket && m.transport.base_port == 0) {
    errors.emplace_back("transport: base_port must be > 0");
  }
  return errors;
}

MaterializedData materialize_data(const RunManifest& m) {
  SyntheticSpec gen = m.data.generator;
  gen.num_samples += m.data.holdout_samples;
  const Dataset all = generate_synthetic(gen);

  std::vector<std::size_t> pool(m.data.generator.num_samples);
  std::vector<std::size_t> held(m.data.holdout_samples);
  for (std::size_t i = 0; i < pool.size(); ++i) pool[i] = i;
  for (std::size_t i = 0; i < held.size(); ++i) held[i] = pool.size() + i;

  MaterializedData out;
  out.holdout = all.select(held);
  PartitionSpec part = m.data.partition;
  part.num_clients = m.topology.num_clients;
  const auto partitions = partition_dataset(all.select(pool), part);
  for (std::size_t i = 0; i < partitions.size(); ++i) {
    out.splits.push_back(split_train_test(partitions[i], mix64(part.seed, i)));
  }
  return out;
}

NodeConfigs propagate_config(const RunManifest& m) {
  if (auto errors = validate_manifest(m); !errors.empty()) {
    throw Error(Errc::configuration, errors.front());
  }
  const auto ids = client_ids(m.topology.num_clients);
  const TopologyPlan plan = build_plan(m.topology, ids, m.seed);
  auto data = materialize_data(m);

  NodeConfigs out;
  auto& c = out.collector;
  c.run_id = m.run_id;
  c.strategy = m.strategy;
  c.topology = plan;
  c.total_rounds = m.total_rounds;
  c.model_spec = m.model;
  c.run_seed = m.seed;
  c.hyper = m.hyper;
  c.join_timeout_ms = m.transport.join_timeout_ms;
  c.checkpoint_every = m.checkpoint_every;
  if (m.data.holdout_samples > 0) c.holdout = std::move(data.holdout);

  const bool ring = m.topology.kind == TopologyKind::star_ring;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    LocalOpsConfig l;
    l.client_id = ids[i];
    l.parent_id = plan.parent.at(ids[i]);
    l.role = ring ? LocalRole::ring_member : LocalRole::leaf;
    l.model_spec = m.model;
    l.client_index = i;
    l.partition_index = i;
    l.split_seed = mix64(m.data.partition.seed, i);
    l.data = std::move(data.splits[i]);
    l.local_rounds = plan.local_rounds;
    if (ring) l.ring = plan.ring_order.at(*plan.ring_of(ids[i]));
    l.round_timeout_ms = m.strategy.round_timeout_ms;
    l.join_retry_ms = m.transport.join_retry_ms;
    l.join_timeout_ms = m.transport.join_timeout_ms;
    out.locals.push_back(std::move(l));
  }
  for (const auto& mid : plan.mid_aggregators()) {
    LocalOpsConfig l;
    l.client_id = mid;
    l.parent_id = plan.parent.at(mid);
    l.role = LocalRole::mid_aggregator;
    l.model_spec = m.model;
    l.local_rounds = plan.local_rounds;
    l.children = plan.children_of(mid);
    l.round_timeout_ms = m.strategy.round_timeout_ms;
    l.join_retry_ms = m.transport.join_retry_ms;
    l.join_timeout_ms = m.transport.join_timeout_ms;
    out.locals.push_back(std::move(l));
  }
  return out;
}

AddressBook address_book(const RunManifest& m) {
  AddressBook book;
  const auto base = m.transport.base_port;
  book[kCollectorId] = Endpoint{m.transport.host, static_cast<std::uint16_t>(base)};
  const auto ids = client_ids(m.topology.num_clients);
  for (std::size_t i = 0; i < ids.size(); ++i) {
    book[ids[i]] = Endpoint{m.transport.host, static_cast<std::uint16_t>(base + 1 + i)};
  }
  if (m.topology.kind == TopologyKind::hierarchical) {
    for (std::size_t j = 0; j < m.topology.num_mid_aggregators.value_or(0); ++j) {
      book[mid_aggregator_id(j)] = Endpoint{m.transport.host, static_cast<std::uint16_t>(base + 1 + ids.size() + j)};
    }
  }
  return book;
}

}  // namespace fedtopo
