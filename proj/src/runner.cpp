// Copyright 2026 The fedtopo Authors
// SPDX-License-Identifier: Apache-2.0

#include "fedtopo/runner.hpp"

#include <sys/wait.h>
#include <unistd.h>

#include <chrono>
#include <fstream>
#include <iostream>
#include <csignal>
#include <memory>
#include <thread>

#include "fedtopo/error.hpp"
#include "fedtopo/local_ops.hpp"
#include "fedtopo/rng.hpp"

namespace fedtopo {

namespace fs = std::filesystem;

namespace {

constexpr std::uint64_t kNetworkSalt = 0xFA17;

std::unique_ptr<Node> make_local_node(LocalOpsConfig config) {
  if (config.role == LocalRole::mid_aggregator) return std::make_unique<MidAggregatorNode>(std::move(config));
  return std::make_unique<LocalOpsNode>(std::move(config));
}

struct NodeFile {
  RunManifest manifest;
  std::string node_id;
  fs::path runs_dir;
};

NodeFile read_node_file(const fs::path& path) {
  const Json doc = read_manifest_file(path);
  NodeFile f;
  f.manifest = manifest_from_json(jsonio::field(doc, "manifest"));
  f.node_id = jsonio::get_str(doc, "node_id");
  f.runs_dir = jsonio::get_str(doc, "runs_dir");
  return f;
}

pid_t spawn(const fs::path& exe, const char* command, const fs::path& config) {
  const pid_t pid = ::fork();
  if (pid < 0) throw Error(Errc::startup_failure, "fork failed");
  if (pid == 0) {
    ::execl(exe.c_str(), exe.c_str(), command, config.c_str(), static_cast<char*>(nullptr));
    std::perror("exec");
    ::_exit(127);
  }
  return pid;
}

bool wait_listening(const Endpoint& ep, pid_t pid) {
  for (int i = 0; i < 500; ++i) {
    if (probe_endpoint(ep)) return true;
    int status = 0;
    if (::waitpid(pid, &status, WNOHANG) == pid) return false;
    std::this_thread::sleep_for(std::chrono::milliseconds(10));
  }
  return false;
}

}  // namespace

RunOutcome run_inproc(const RunManifest& manifest, Repository* repo) {
  NodeConfigs configs = propagate_config(manifest);
  if (repo) repo->create_run(manifest.run_id, to_json(manifest));

  CollectorNode collector(std::move(configs.collector), repo);
  std::vector<std::unique_ptr<Node>> locals;
  for (auto& c : configs.locals) locals.push_back(make_local_node(std::move(c)));

  SimNetwork net(manifest.transport.faults, mix64(manifest.seed, kNetworkSalt));
  net.add_node(collector);
  for (auto& n : locals) net.add_node(*n);
  net.run([&] {
    if (collector.status() == NodeStatus::running) return false;
    for (const auto& n : locals) {
      if (n->status() == NodeStatus::running) return false;
    }
    return true;
  });

  RunOutcome out;
  out.summary = collector.summary();
  if (out.summary.status == RunStatus::running) {
    // The event queue drained before the collector finished.
    out.summary.status = RunStatus::failed;
    out.summary.error = "simulation stalled";
    if (repo) {
      try {
        repo->finish_run(manifest.run_id, RunStatus::failed, out.summary.rounds_completed,
                         out.summary.final_accuracy);
      } catch (const Error&) {
        out.summary.persisted = false;
      }
    }
  }
  out.history = collector.history();
  out.metrics = collector.metrics();
  out.models = collector.models();
  out.network = net.stats();
  out.virtual_ms = net.now();
  return out;
}

NodeStatus run_local_ops(const LocalOpsConfig& config, const AddressBook& book, const SocketOptions& options) {
  auto node = make_local_node(config);
  return run_socket_node(*node, book, config.parent_id, options);
}

int serve_collector(const fs::path& config_path) {
  const NodeFile f = read_node_file(config_path);
  NodeConfigs configs = propagate_config(f.manifest);
  Repository repo(f.runs_dir);
  CollectorNode node(std::move(configs.collector), &repo);
  run_socket_node(node, address_book(f.manifest), "");
  if (node.summary().status == RunStatus::running) {
    repo.finish_run(f.manifest.run_id, RunStatus::failed, node.summary().rounds_completed,
                    node.summary().final_accuracy);
    return 1;
  }
  if (!node.summary().error.empty()) std::cerr << "collector: " << node.summary().error << "\n";
  return node.summary().status == RunStatus::done ? 0 : 1;
}

int serve_localops(const fs::path& config_path) {
  const NodeFile f = read_node_file(config_path);
  NodeConfigs configs = propagate_config(f.manifest);
  for (const auto& c : configs.locals) {
    if (c.client_id == f.node_id) {
      return run_local_ops(c, address_book(f.manifest)) == NodeStatus::completed ? 0 : 1;
    }
  }
  throw Error(Errc::configuration, "no node '" + f.node_id + "' in the manifest");
}

RunSummary run_socket(const RunManifest& manifest, const fs::path& runs_dir, const fs::path& exe) {
  NodeConfigs configs = propagate_config(manifest);
  Repository repo(runs_dir);
  repo.create_run(manifest.run_id, to_json(manifest));
  const AddressBook book = address_book(manifest);

  const fs::path dir = repo.run_dir(manifest.run_id).parent_path() /
                       (".nodes-" + manifest.run_id + "-" + std::to_string(::getpid()));
  fs::create_directories(dir);
  const Json doc = to_json(manifest);
  auto write_config = [&](const std::string& id) {
    const fs::path p = dir / (id + ".json");
    std::ofstream(p) << canonical_dump(Json{{"manifest", doc},
                                            {"node_id", id},
                                            {"runs_dir", fs::absolute(runs_dir).string()}});
    return p;
  };

  // Parents first, so children find a listening endpoint on their first try.
  std::vector<pid_t> pids;
  std::vector<std::string> mids;
  std::vector<std::string> leaves;
  for (const auto& c : configs.locals) (c.role == LocalRole::mid_aggregator ? mids : leaves).push_back(c.client_id);

  bool started = true;
  auto launch = [&](const std::string& id, const char* command) {
    const pid_t pid = spawn(exe, command, write_config(id));
    pids.push_back(pid);
    if (!wait_listening(book.at(id), pid)) started = false;
  };
  launch(kCollectorId, "serve-collector");
  for (const auto& id : mids) {
    if (started) launch(id, "serve-localops");
  }
  for (const auto& id : leaves) {
    if (started) launch(id, "serve-localops");
  }
  if (!started) {
    for (pid_t pid : pids) ::kill(pid, SIGTERM);
  }

  int collector_status = -1;
  for (std::size_t i = 0; i < pids.size(); ++i) {
    int status = 0;
    ::waitpid(pids[i], &status, 0);
    if (i == 0) collector_status = status;
  }
  std::error_code ec;
  fs::remove_all(dir, ec);

  RunRecord record = repo.load_run_record(manifest.run_id);
  if (record.status == RunStatus::running) {
    repo.finish_run(manifest.run_id, RunStatus::failed, record.rounds_completed, record.final_accuracy);
    record.status = RunStatus::failed;
  }
  RunSummary summary;
  summary.run_id = manifest.run_id;
  summary.status = record.status;
  summary.rounds_completed = record.rounds_completed;
  summary.final_accuracy = record.final_accuracy;
  if (!started) summary.error = "a node failed to start";
  else if (!WIFEXITED(collector_status)) summary.error = "collector terminated abnormally";
  return summary;
}

}  // namespace fedtopo
