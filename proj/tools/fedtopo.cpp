// Copyright 2026 The fedtopo Authors
// SPDX-License-Identifier: Apache-2.0

#include <unistd.h>

#include <charconv>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "fedtopo/error.hpp"
#include "fedtopo/manifest.hpp"
#include "fedtopo/repository.hpp"
#include "fedtopo/runner.hpp"

namespace fs = std::filesystem;
using namespace fedtopo;

namespace {

constexpr int kOk = 0;
constexpr int kDomainFailure = 1;
constexpr int kIoFailure = 2;

std::string format_number(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

int exit_code_for(const Error& e) {
  switch (e.code()) {
    case Errc::storage:
    case Errc::protocol:
    case Errc::startup_failure:
      return kIoFailure;
    default:
      return kDomainFailure;
  }
}

struct RunArgs {
  std::string manifest;
  std::vector<std::string> overrides;
  std::string transport;
  std::string runs_dir = "runs";
  bool force = false;
};

// Parses, applies overrides and validates. Returns an exit code on failure.
std::optional<int> load(const std::string& path, const std::vector<std::string>& overrides,
                        const std::string& transport, RunManifest& out) {
  Json doc;
  try {
    doc = read_manifest_file(path);
  } catch (const Error& e) {
    std::cerr << "fedtopo: " << e.what() << "\n";
    return kIoFailure;
  }
  try {
    for (const auto& o : overrides) apply_override(doc, o);
    if (!transport.empty()) apply_override(doc, "transport.kind=" + transport);
    out = manifest_from_json(doc);
  } catch (const Error& e) {
    std::cout << e.what() << "\n";
    return kDomainFailure;
  }
  const auto errors = validate_manifest(out);
  for (const auto& e : errors) std::cout << e << "\n";
  if (!errors.empty()) return kDomainFailure;
  return std::nullopt;
}

int cmd_validate(const std::string& path) {
  RunManifest m;
  if (auto rc = load(path, {}, "", m)) return *rc;
  return kOk;
}

fs::path self_exe(const char* argv0) {
  std::error_code ec;
  auto p = fs::read_symlink("/proc/self/exe", ec);
  return ec ? fs::absolute(argv0) : p;
}

int cmd_run(const RunArgs& args, const char* argv0) {
  RunManifest m;
  if (auto rc = load(args.manifest, args.overrides, args.transport, m)) return *rc;
  Repository repo(args.runs_dir);
  if (args.force) {
    std::error_code ec;
    fs::remove_all(repo.run_dir(m.run_id), ec);
  }
  RunSummary summary;
  if (m.transport.kind == TransportKind::inproc) {
    summary = run_inproc(m, &repo).summary;
  } else {
    summary = run_socket(m, args.runs_dir, self_exe(argv0));
  }
  if (!summary.error.empty()) std::cerr << "fedtopo: " << summary.error << "\n";
  if (!summary.persisted) std::cerr << "fedtopo: results were not fully persisted\n";
  std::cout << summary.run_id << " " << to_string(summary.status) << " " << summary.rounds_completed << " "
            << (summary.final_accuracy ? format_number(*summary.final_accuracy) : "none") << "\n";
  return summary.status == RunStatus::done ? kOk : kDomainFailure;
}

int cmd_report(const std::string& run_id, const std::string& format, const std::string& runs_dir) {
  Repository repo(runs_dir);
  if (!is_safe_run_id(run_id) || !repo.run_exists(run_id)) {
    std::cerr << "fedtopo: unknown run '" << run_id << "'\n";
    return kDomainFailure;
  }
  const auto records = repo.load_run_report(run_id);
  if (format == "csv") {
    std::cout << "run_id,round,scope,metric,value\n";
    for (const auto& r : records) {
      std::cout << r.run_id << "," << r.round << "," << r.scope << "," << r.metric << ","
                << format_number(r.value) << "\n";
    }
  } else {
    for (const auto& r : records) std::cout << metric_line(r) << "\n";
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"fedtopo: federated learning runs over configurable topologies"};
  app.require_subcommand(1);

  std::string manifest_path;
  auto* validate = app.add_subcommand("validate", "Check a manifest; prints one line per problem");
  validate->add_option("manifest", manifest_path, "Manifest file")->required();

  RunArgs run_args;
  auto* run = app.add_subcommand("run", "Execute a run and print `run_id status rounds final_accuracy`");
  run->add_option("manifest", run_args.manifest, "Manifest file")->required();
  run->add_option("--set", run_args.overrides, "Override a manifest field, dotted.path=value");
  run->add_option("--transport", run_args.transport, "inproc or socket")
      ->check(CLI::IsMember({"inproc", "socket"}));
  run->add_option("--runs-dir", run_args.runs_dir, "Repository root")->capture_default_str();
  run->add_flag("--force", run_args.force, "Replace an existing run with the same run_id");

  std::string run_id;
  std::string format = "csv";
  std::string report_dir = "runs";
  auto* report = app.add_subcommand("report", "Print the metrics of a run");
  report->add_option("run_id", run_id, "Run id")->required();
  report->add_option("--format", format, "csv or jsonlines")
      ->check(CLI::IsMember({"csv", "jsonlines"}))
      ->capture_default_str();
  report->add_option("--runs-dir", report_dir, "Repository root")->capture_default_str();

  std::string node_config;
  auto* serve_c = app.add_subcommand("serve-collector", "Run the collector process of a socket run");
  serve_c->add_option("config", node_config, "Node config file")->required();
  auto* serve_l = app.add_subcommand("serve-localops", "Run one local node process of a socket run");
  serve_l->add_option("config", node_config, "Node config file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kIoFailure;
  }

  try {
    if (*validate) return cmd_validate(manifest_path);
    if (*run) return cmd_run(run_args, argv[0]);
    if (*report) return cmd_report(run_id, format, report_dir);
    if (*serve_c) return serve_collector(node_config);
    if (*serve_l) return serve_localops(node_config);
  } catch (const Error& e) {
    std::cerr << "fedtopo: " << e.what() << "\n";
    return exit_code_for(e);
  } catch (const std::exception& e) {
    std::cerr << "fedtopo: " << e.what() << "\n";
    return kIoFailure;
  }
  return kDomainFailure;
}
