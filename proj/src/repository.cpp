// Copyright 2026 The fedtopo Authors
// SPDX-License-Identifier: Apache-2.0

#include "fedtopo/repository.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <array>
#include <cctype>
#include <cerrno>
#include <chrono>
#include <cmath>
#include <cstring>
#include <ctime>
#include <fstream>
#include <sstream>

#include "fedtopo/error.hpp"
#include "fedtopo/rng.hpp"

namespace fedtopo {

namespace fs = std::filesystem;
using namespace jsonio;

namespace {

constexpr std::array<std::string_view, 7> kMetrics = {
    "train_loss", "eval_loss", "aggregated_eval_loss", "global_accuracy",
    "accuracy",   "participants", "duration_ms"};

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::not_found, "cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file_atomic(const fs::path& path, const std::string& content) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(Errc::storage, "cannot write " + tmp.string());
    out << content;
    out.flush();
    if (!out) throw Error(Errc::storage, "failed writing " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) throw Error(Errc::storage, "cannot rename " + tmp.string() + ": " + ec.message());
}

// Creates `path` exclusively; the repository never overwrites artifacts.
void write_file_exclusive(const fs::path& path, const std::string& content) {
  const int fd = ::open(path.c_str(), O_WRONLY | O_CREAT | O_EXCL, 0644);
  if (fd < 0) {
    throw Error(Errc::storage, "cannot create " + path.string() + ": " + std::strerror(errno));
  }
  std::size_t off = 0;
  while (off < content.size()) {
    const ssize_t n = ::write(fd, content.data() + off, content.size() - off);
    if (n < 0) {
      if (errno == EINTR) continue;
      ::close(fd);
      throw Error(Errc::storage, "write failed for " + path.string());
    }
    off += static_cast<std::size_t>(n);
  }
  ::close(fd);
}

std::string hex64(std::uint64_t v) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string s(16, '0');
  for (int i = 15; i >= 0; --i, v >>= 4) s[static_cast<std::size_t>(i)] = kDigits[v & 0xF];
  return s;
}

Json record_json(const RunRecord& r) {
  Json artifacts = Json::object();
  for (const auto& [name, a] : r.artifacts) {
    artifacts[name] = Json{{"file", a.file}, {"content_hash", a.content_hash}};
  }
  Json j{{"run_id", r.run_id},
         {"status", std::string(to_string(r.status))},
         {"started_at", r.started_at},
         {"rounds_completed", r.rounds_completed},
         {"artifacts", std::move(artifacts)}};
  if (r.ended_at) j["ended_at"] = *r.ended_at;
  if (r.final_accuracy) j["final_accuracy"] = number(*r.final_accuracy);
  return j;
}

}  // namespace

bool is_known_metric(std::string_view metric) {
  return std::find(kMetrics.begin(), kMetrics.end(), metric) != kMetrics.end();
}

bool is_valid_scope(std::string_view scope) {
  if (scope == "global") return true;
  if (scope.starts_with("cluster:")) {
    const auto digits = scope.substr(8);
    return !digits.empty() && std::all_of(digits.begin(), digits.end(),
                                           [](char c) { return std::isdigit(static_cast<unsigned char>(c)); });
  }
  return scope.starts_with("client:") && scope.size() > 7;
}

void check_metric(const MetricRecord& r) {
  if (!is_known_metric(r.metric)) throw Error(Errc::validation, "unknown metric '" + r.metric + "'");
  if (!is_valid_scope(r.scope)) throw Error(Errc::validation, "bad metric scope '" + r.scope + "'");
  if (!std::isfinite(r.value)) throw Error(Errc::validation, r.metric + " value is not finite");
}

std::string metric_line(const MetricRecord& r) {
  check_metric(r);
  return canonical_dump(Json{{"run_id", r.run_id},
                             {"round", r.round},
                             {"scope", r.scope},
                             {"metric", r.metric},
                             {"value", r.value}});
}

MetricRecord metric_from_line(std::string_view line) {
  Json j;
  try {
    j = Json::parse(line);
  } catch (const Json::exception& e) {
    throw Error(Errc::validation, std::string("bad metrics line: ") + e.what());
  }
  MetricRecord r{get_str(j, "run_id"), get_u64(j, "round"), get_str(j, "scope"), get_str(j, "metric"),
                 get_f64(j, "value")};
  check_metric(r);
  return r;
}

std::string_view to_string(RunStatus s) {
  switch (s) {
    case RunStatus::running: return "running";
    case RunStatus::done: return "done";
    case RunStatus::aborted: return "aborted";
    case RunStatus::failed: return "failed";
  }
  return "failed";
}

RunStatus run_status_from_string(std::string_view s) {
  for (auto st : {RunStatus::running, RunStatus::done, RunStatus::aborted, RunStatus::failed}) {
    if (to_string(st) == s) return st;
  }
  throw Error(Errc::validation, "unknown run status '" + std::string(s) + "'");
}

bool is_safe_run_id(std::string_view id) {
  if (id.empty() || id.size() > 128 || id == "." || id == "..") return false;
  return std::all_of(id.begin(), id.end(), [](char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.';
  });
}

std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

Repository::Repository(fs::path root) : root_(std::move(root)) {}

fs::path Repository::run_dir(const std::string& run_id) const {
  if (!is_safe_run_id(run_id)) throw Error(Errc::validation, "run_id '" + run_id + "' is not filesystem-safe");
  return root_ / run_id;
}

bool Repository::run_exists(const std::string& run_id) const {
  return fs::exists(run_dir(run_id) / "run.json");
}

void Repository::create_run(const std::string& run_id, const Json& manifest) {
  const fs::path dir = run_dir(run_id);
  std::error_code ec;
  fs::create_directories(root_, ec);
  if (!fs::create_directory(dir, ec)) {
    throw Error(Errc::storage, ec ? "cannot create " + dir.string() + ": " + ec.message()
                                  : "run directory " + dir.string() + " already exists");
  }
  fs::create_directories(dir / "models", ec);
  if (ec) throw Error(Errc::storage, "cannot create " + (dir / "models").string());
  write_file_exclusive(dir / "manifest", canonical_dump(manifest) + "\n");
  write_file_exclusive(dir / "metrics.log", "");
  RunRecord record;
  record.run_id = run_id;
  record.manifest = manifest;
  record.started_at = utc_timestamp();
  write_record(record);
}

void Repository::write_record(const RunRecord& record) const {
  write_file_atomic(run_dir(record.run_id) / "run.json", canonical_dump(record_json(record)) + "\n");
}

RunRecord Repository::load_run_record(const std::string& run_id) const {
  const fs::path dir = run_dir(run_id);
  if (!fs::exists(dir / "run.json")) throw Error(Errc::not_found, "unknown run '" + run_id + "'");
  Json j;
  try {
    j = Json::parse(read_file(dir / "run.json"));
  } catch (const Json::exception& e) {
    throw Error(Errc::storage, std::string("corrupt run.json: ") + e.what());
  }
  RunRecord r;
  r.run_id = get_str(j, "run_id");
  r.status = run_status_from_string(get_str(j, "status"));
  r.started_at = get_str(j, "started_at");
  if (j.contains("ended_at")) r.ended_at = get_str(j, "ended_at");
  r.rounds_completed = get_u64(j, "rounds_completed");
  if (j.contains("final_accuracy")) r.final_accuracy = get_f64(j, "final_accuracy");
  for (const auto& [name, a] : field(j, "artifacts").items()) {
    r.artifacts[name] = ArtifactEntry{get_str(a, "file"), get_str(a, "content_hash")};
  }
  r.manifest = Json::parse(read_file(dir / "manifest"));
  return r;
}

void Repository::finish_run(const std::string& run_id, RunStatus status, std::uint64_t rounds_completed,
                            std::optional<double> final_accuracy) {
  RunRecord r = load_run_record(run_id);
  r.status = status;
  r.rounds_completed = rounds_completed;
  r.final_accuracy = final_accuracy;
  if (status != RunStatus::running) r.ended_at = utc_timestamp();
  write_record(r);
}

std::uint64_t Repository::total_rounds(const std::string& run_id) const {
  auto it = total_rounds_cache_.find(run_id);
  if (it != total_rounds_cache_.end()) return it->second;
  std::uint64_t total = UINT64_MAX;
  try {
    const Json m = Json::parse(read_file(run_dir(run_id) / "manifest"));
    if (m.contains("total_rounds") && m["total_rounds"].is_number_integer() && m["total_rounds"].get<std::int64_t>() >= 0) {
      total = m["total_rounds"].get<std::uint64_t>();
    }
  } catch (const Json::exception&) {
  }
  total_rounds_cache_[run_id] = total;
  return total;
}

void Repository::append_metric(const MetricRecord& record) {
  const std::string line = metric_line(record) + "\n";
  if (record.round > total_rounds(record.run_id)) {
    throw Error(Errc::validation, "round " + std::to_string(record.round) + " exceeds total_rounds");
  }
  const fs::path path = run_dir(record.run_id) / "metrics.log";
  if (!fs::exists(path)) throw Error(Errc::not_found, "unknown run '" + record.run_id + "'");
  const int fd = ::open(path.c_str(), O_WRONLY | O_APPEND);
  if (fd < 0) throw Error(Errc::storage, "cannot open " + path.string());
  // One write per record keeps appends atomic for concurrent readers.
  const ssize_t n = ::write(fd, line.data(), line.size());
  ::close(fd);
  if (n != static_cast<ssize_t>(line.size())) throw Error(Errc::storage, "short write to " + path.string());
}

std::vector<MetricRecord> Repository::load_run_report(const std::string& run_id) const {
  const fs::path path = run_dir(run_id) / "metrics.log";
  if (!fs::exists(path)) throw Error(Errc::not_found, "unknown run '" + run_id + "'");
  std::ifstream in(path);
  std::vector<MetricRecord> out;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty()) out.push_back(metric_from_line(line));
  }
  return out;
}

fs::path Repository::store(const std::string& run_id, const std::string& name,
                           const std::vector<ModelParams>& models) {
  RunRecord record = load_run_record(run_id);
  Json list = Json::array();
  for (const auto& m : models) list.push_back(to_json(m));
  const std::string content = canonical_dump(Json{{"models", std::move(list)}}) + "\n";
  const std::string rel = "models/" + name;
  const fs::path path = run_dir(run_id) / rel;
  write_file_exclusive(path, content);
  record.artifacts[name] = ArtifactEntry{rel, hex64(hash_string(content))};
  write_record(record);
  return path;
}

fs::path Repository::store_artifact(const std::string& run_id, std::uint64_t round,
                                    const std::vector<ModelParams>& models) {
  return store(run_id, "round-" + std::to_string(round), models);
}

fs::path Repository::store_final(const std::string& run_id, const std::vector<ModelParams>& models) {
  return store(run_id, "final", models);
}

std::vector<ModelParams> Repository::load_artifact_set(const std::string& run_id, const std::string& name) const {
  const RunRecord record = load_run_record(run_id);
  auto it = record.artifacts.find(name);
  if (it == record.artifacts.end()) {
    throw Error(Errc::not_found, "no artifact '" + name + "' in run '" + run_id + "'");
  }
  const std::string content = read_file(run_dir(run_id) / it->second.file);
  if (hex64(hash_string(content)) != it->second.content_hash) {
    throw Error(Errc::storage, "artifact " + it->second.file + " does not match its content hash");
  }
  const Json j = Json::parse(content);
  std::vector<ModelParams> out;
  for (const auto& m : field(j, "models")) out.push_back(model_params_from_json(m));
  return out;
}

ModelParams Repository::load_artifact(const std::string& run_id, std::uint64_t round) const {
  auto models = load_artifact_set(run_id, "round-" + std::to_string(round));
  if (models.empty()) throw Error(Errc::not_found, "empty artifact");
  return std::move(models.front());
}

}  // namespace fedtopo
