// Copyright 2026 The fedtopo Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <functional>
#include <fstream>
#include <limits>

#include "doctest.h"

#include "fedtopo/error.hpp"
#include "fedtopo/repository.hpp"
#include "support/temp_dir.hpp"

using namespace fedtopo;
using fedtopo::testing::TempDir;

namespace {

Json manifest_with_rounds(std::uint64_t rounds) { return Json{{"run_id", "r"}, {"total_rounds", rounds}}; }

Errc error_code(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("no error thrown");
  return Errc::configuration;
}

}  // namespace

TEST_CASE("metrics append and report in order") {
  TempDir dir("repo");
  Repository repo(dir.path());
  repo.create_run("r1", manifest_with_rounds(10));
  const std::vector<MetricRecord> recs{{"r1", 1, "global", "global_accuracy", 0.5},
                                       {"r1", 1, "client:client-000", "train_loss", 0.25},
                                       {"r1", 2, "cluster:1", "participants", 3}};
  for (const auto& r : recs) repo.append_metric(r);
  CHECK(repo.load_run_report("r1") == recs);

  // A new handle on the same root sees the same data.
  Repository reopened(dir.path());
  CHECK(reopened.load_run_report("r1") == recs);
  reopened.append_metric({"r1", 3, "global", "duration_ms", 12});
  CHECK(repo.load_run_report("r1").size() == 4);
}

TEST_CASE("invalid metrics are rejected") {
  TempDir dir("repo");
  Repository repo(dir.path());
  repo.create_run("r1", manifest_with_rounds(5));
  CHECK(error_code([&] { repo.append_metric({"r1", 1, "global", "global_accuracy", std::nan("")}); }) ==
        Errc::validation);
  CHECK(error_code([&] {
          repo.append_metric({"r1", 1, "global", "eval_loss", std::numeric_limits<double>::infinity()});
        }) == Errc::validation);
  CHECK(error_code([&] { repo.append_metric({"r1", 1, "global", "made_up", 1}); }) == Errc::validation);
  CHECK(error_code([&] { repo.append_metric({"r1", 1, "planet", "accuracy", 1}); }) == Errc::validation);
  CHECK(error_code([&] { repo.append_metric({"r1", 6, "global", "accuracy", 1}); }) == Errc::validation);
  CHECK(error_code([&] { repo.append_metric({"nope", 1, "global", "accuracy", 1}); }) == Errc::not_found);
  CHECK(repo.load_run_report("r1").empty());
}

TEST_CASE("scope grammar") {
  CHECK(is_valid_scope("global"));
  CHECK(is_valid_scope("cluster:0"));
  CHECK(is_valid_scope("client:client-007"));
  CHECK_FALSE(is_valid_scope("cluster:"));
  CHECK_FALSE(is_valid_scope("cluster:x"));
  CHECK_FALSE(is_valid_scope("client:"));
  CHECK_FALSE(is_valid_scope(""));
}

TEST_CASE("metric lines round trip") {
  const MetricRecord r{"run", 4, "cluster:2", "aggregated_eval_loss", 0.1 + 0.2};
  CHECK(metric_from_line(metric_line(r)) == r);
}

TEST_CASE("run lifecycle") {
  TempDir dir("repo");
  Repository repo(dir.path());
  repo.create_run("life", manifest_with_rounds(3));
  CHECK(repo.run_exists("life"));
  CHECK(error_code([&] { repo.create_run("life", manifest_with_rounds(3)); }) == Errc::storage);
  CHECK(error_code([&] { repo.create_run("../escape", manifest_with_rounds(3)); }) == Errc::validation);

  auto rec = repo.load_run_record("life");
  CHECK(rec.status == RunStatus::running);
  CHECK_FALSE(rec.ended_at.has_value());
  CHECK(rec.manifest == manifest_with_rounds(3));

  repo.finish_run("life", RunStatus::done, 3, 0.875);
  rec = repo.load_run_record("life");
  CHECK(rec.status == RunStatus::done);
  CHECK(rec.ended_at.has_value());
  CHECK(rec.rounds_completed == 3);
  CHECK(rec.final_accuracy == 0.875);
  CHECK(error_code([&] { repo.load_run_record("ghost"); }) == Errc::not_found);
}

TEST_CASE("artifacts round trip bitwise") {
  TempDir dir("repo");
  Repository repo(dir.path());
  repo.create_run("art", manifest_with_rounds(5));
  const ModelSpec spec{ModelKind::mlp, 4, {3}, 2};
  auto p = init_model(spec, 3);
  p.layers[0].values[0] = 0.1 + 0.2;
  p.layers[0].values[1] = 1e-310;
  repo.store_artifact("art", 3, {p});
  const auto back = repo.load_artifact("art", 3);
  CHECK(params_distance(p, back) == 0.0);
  CHECK(back == p);

  const std::vector<ModelParams> pair{p, init_model(spec, 4)};
  repo.store_final("art", pair);
  CHECK(repo.load_artifact_set("art", "final") == pair);

  CHECK(error_code([&] { repo.load_artifact("art", 4); }) == Errc::not_found);
  CHECK(error_code([&] { repo.load_artifact("ghost", 1); }) == Errc::not_found);
  CHECK(error_code([&] { repo.store_artifact("art", 3, {p}); }) == Errc::storage);

  const auto rec = repo.load_run_record("art");
  CHECK(rec.artifacts.count("round-3") == 1);
  CHECK(rec.artifacts.count("final") == 1);
}

TEST_CASE("tampered artifacts are detected") {
  TempDir dir("repo");
  Repository repo(dir.path());
  repo.create_run("t", manifest_with_rounds(2));
  const auto path = repo.store_artifact("t", 1, {init_model({ModelKind::logreg, 2, {}, 2}, 1)});
  {
    std::ofstream out(path, std::ios::app);
    out << " ";
  }
  CHECK_THROWS_AS(repo.load_artifact("t", 1), Error);
}

TEST_CASE("run id safety") {
  CHECK(is_safe_run_id("abc-1.2_x"));
  CHECK_FALSE(is_safe_run_id(""));
  CHECK_FALSE(is_safe_run_id(".."));
  CHECK_FALSE(is_safe_run_id("a/b"));
  CHECK_FALSE(is_safe_run_id(std::string(200, 'a')));
}
