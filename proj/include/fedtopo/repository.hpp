// Copyright 2026 The fedtopo Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "fedtopo/json_io.hpp"
#include "fedtopo/model.hpp"

namespace fedtopo {

struct MetricRecord {
  std::string run_id;
  std::uint64_t round = 0;
  std::string scope;   // global | cluster:<k> | client:<id>
  std::string metric;  // see is_known_metric
  double value = 0.0;

  bool operator==(const MetricRecord&) const = default;
};

bool is_known_metric(std::string_view metric);
bool is_valid_scope(std::string_view scope);
// Throws validation error on unknown names or a non-finite value.
void check_metric(const MetricRecord& record);

std::string metric_line(const MetricRecord& record);
MetricRecord metric_from_line(std::string_view line);

enum class RunStatus { running, done, aborted, failed };
std::string_view to_string(RunStatus s);
RunStatus run_status_from_string(std::string_view s);

struct ArtifactEntry {
  std::string file;  // relative to the run directory
  std::string content_hash;
  bool operator==(const ArtifactEntry&) const = default;
};

struct RunRecord {
  std::string run_id;
  Json manifest;
  RunStatus status = RunStatus::running;
  std::string started_at;
  std::optional<std::string> ended_at;  // present iff terminal
  std::uint64_t rounds_completed = 0;
  std::optional<double> final_accuracy;
  std::map<std::string, ArtifactEntry> artifacts;  // "round-<r>" or "final"
};

/// Filesystem-backed FL repository:
///
///   <root>/<run_id>/manifest       canonical manifest text
///   <root>/<run_id>/run.json       RunRecord
///   <root>/<run_id>/metrics.log    one canonical MetricRecord per line
///   <root>/<run_id>/models/round-<r>, models/final
///
/// Metrics and artifacts are append-only; only run.json is rewritten, and
/// always atomically.
class Repository {
 public:
  explicit Repository(std::filesystem::path root);

  const std::filesystem::path& root() const noexcept { return root_; }
  std::filesystem::path run_dir(const std::string& run_id) const;
  bool run_exists(const std::string& run_id) const;

  // Throws storage error when the run directory already exists.
  void create_run(const std::string& run_id, const Json& manifest);
  RunRecord load_run_record(const std::string& run_id) const;
  void finish_run(const std::string& run_id, RunStatus status, std::uint64_t rounds_completed,
                  std::optional<double> final_accuracy);

  void append_metric(const MetricRecord& record);
  std::vector<MetricRecord> load_run_report(const std::string& run_id) const;

  std::filesystem::path store_artifact(const std::string& run_id, std::uint64_t round,
                                       const std::vector<ModelParams>& models);
  std::filesystem::path store_final(const std::string& run_id, const std::vector<ModelParams>& models);

  // First (or only) model of a stored round.
  ModelParams load_artifact(const std::string& run_id, std::uint64_t round) const;
  std::vector<ModelParams> load_artifact_set(const std::string& run_id, const std::string& name) const;

 private:
  std::filesystem::path store(const std::string& run_id, const std::string& name,
                              const std::vector<ModelParams>& models);
  void write_record(const RunRecord& record) const;
  std::uint64_t total_rounds(const std::string& run_id) const;

  std::filesystem::path root_;
  mutable std::map<std::string, std::uint64_t> total_rounds_cache_;
};

bool is_safe_run_id(std::string_view run_id);
std::string utc_timestamp();

}  // namespace fedtopo
