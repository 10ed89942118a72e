// Copyright 2026 The fedtopo Authors
// SPDX-License-Identifier: Apache-2.0

// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// non-zero when any of them fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <numeric>
#include <sstream>

#include "fedtopo/error.hpp"
#include "fedtopo/runner.hpp"
#include "fedtopo/transport/codec.hpp"
#include "support/envelope_gen.hpp"
#include "support/temp_dir.hpp"

using namespace fedtopo;
namespace fs = std::filesystem;

namespace {

// Tolerances and targets.
constexpr double kMinCentralizedAccuracy = 0.95;
constexpr double kMaxRuntimeSeconds = 30.0;
constexpr double kMinClusterRecovery = 0.90;
constexpr double kMinClusterAccuracy = 0.90;
constexpr double kMaxBaselineAccuracy = 0.65;
constexpr std::size_t kRecoveryWindow = 3;
constexpr double kMinModalShare = 0.80;
constexpr std::size_t kCollapseWindow = 5;
constexpr double kMaxDropoutGap = 0.05;
constexpr std::size_t kStragglerParticipants = 7;
constexpr int kMinEnvelopes = 1000;

const fs::path kManifestDir = FEDTOPO_ACCEPTANCE_MANIFESTS;

struct Verdict {
  bool pass = false;
  std::string detail;
};

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

RunManifest load(const std::string& name) { return manifest_from_json(read_manifest_file(kManifestDir / name)); }

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::vector<double> values_of(const std::vector<MetricRecord>& ms, const std::string& scope, const std::string& metric) {
  std::vector<double> out;
  for (const auto& m : ms) {
    if (m.scope == scope && m.metric == metric) out.push_back(m.value);
  }
  return out;
}

// Completed rounds only, one entry per round.
std::vector<const RoundState*> done_rounds(const RunOutcome& out) {
  std::vector<const RoundState*> rounds;
  for (const auto& st : out.history) {
    if (st.phase == RoundPhase::done) rounds.push_back(&st);
  }
  return rounds;
}

std::string read_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw Error(Errc::not_found, "missing " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Verdict centralized_convergence() {
  const auto m = load("centralized.json");
  const auto t0 = std::chrono::steady_clock::now();
  const auto out = run_inproc(m, nullptr);
  const double secs = seconds_since(t0);

  // Attainability oracle: one model trained with plain SGD on the pooled data.
  const auto data = materialize_data(m);
  Dataset train(m.model.input_dim, m.model.num_classes);
  Dataset test(m.model.input_dim, m.model.num_classes);
  for (const auto& s : data.splits) {
    for (std::size_t i = 0; i < s.train.size(); ++i) train.push_back(s.train.features(i), s.train.label(i));
    for (std::size_t i = 0; i < s.test.size(); ++i) test.push_back(s.test.features(i), s.test.label(i));
  }
  Hyperparams h = m.hyper;
  h.local_epochs = static_cast<std::uint32_t>(m.total_rounds);
  h.seed = m.seed;
  const double oracle = evaluate_model(m.model, train_local(m.model, init_model(m.model, m.seed), train, h).params, test).accuracy;

  const double acc = out.summary.final_accuracy.value_or(0.0);
  const bool pass = out.summary.status == RunStatus::done && acc >= kMinCentralizedAccuracy &&
                    oracle >= kMinCentralizedAccuracy && secs < kMaxRuntimeSeconds;
  return {pass, "global_accuracy " + fmt(acc) + ", pooled SGD oracle " + fmt(oracle) + ", " + fmt(secs) + " s"};
}

RunManifest as_centralized(RunManifest m) {
  m.topology = TopologySpec{TopologyKind::centralized, m.topology.num_clients};
  return m;
}

Verdict hierarchical_equivalence() {
  const auto m = load("hierarchical.json");
  const auto t0 = std::chrono::steady_clock::now();
  const auto hier = run_inproc(m, nullptr);
  const auto flat = run_inproc(as_centralized(m), nullptr);
  const double secs = seconds_since(t0);
  const bool same = !hier.models.empty() && hier.models == flat.models;
  const bool pass = same && hier.summary.status == RunStatus::done && flat.summary.status == RunStatus::done &&
                    secs < kMaxRuntimeSeconds;
  return {pass, std::string(same ? "bitwise identical" : "params differ") + " after " +
                    std::to_string(hier.summary.rounds_completed) + " rounds, " + fmt(secs) + " s"};
}

Verdict ring_degeneracy() {
  const auto m = load("ring.json");
  const std::size_t R = m.topology.local_rounds.value_or(1);
  auto central = as_centralized(m);
  central.hyper.local_epochs = static_cast<std::uint32_t>(R);
  const auto t0 = std::chrono::steady_clock::now();
  const auto ring = run_inproc(m, nullptr);
  const auto flat = run_inproc(central, nullptr);
  const double secs = seconds_since(t0);
  const bool same = !ring.models.empty() && ring.models == flat.models;
  const bool pass = same && ring.summary.status == RunStatus::done && flat.summary.status == RunStatus::done &&
                    secs < kMaxRuntimeSeconds;
  return {pass, std::string(same ? "bitwise identical" : "params differ") + " with R=" + std::to_string(R) + ", " +
                    fmt(secs) + " s"};
}

Verdict ifca_recovery() {
  const auto m = load("ifca_flip.json");
  const auto out = run_inproc(m, nullptr);
  const auto rounds = done_rounds(out);
  if (out.summary.status != RunStatus::done || rounds.size() < kRecoveryWindow) {
    return {false, "run ended " + std::string(to_string(out.summary.status)) + ": " + out.summary.error};
  }
  const std::size_t n = m.topology.num_clients;
  const std::size_t k = m.strategy.num_clusters;
  const auto ids = client_ids(n);

  // (a) assignment agreement under the best relabeling of clusters.
  std::vector<std::size_t> perm(k);
  std::iota(perm.begin(), perm.end(), 0);
  std::size_t best = 0;
  std::size_t total = 0;
  do {
    std::size_t hits = 0;
    total = 0;
    for (std::size_t r = rounds.size() - kRecoveryWindow; r < rounds.size(); ++r) {
      for (std::size_t i = 0; i < n; ++i) {
        const auto it = rounds[r]->received.find(ids[i]);
        ++total;
        if (it != rounds[r]->received.end() && perm[it->second.cluster_id] == cluster_flip_group(i, n, k)) ++hits;
      }
    }
    best = std::max(best, hits);
  } while (std::next_permutation(perm.begin(), perm.end()));
  const double recovery = static_cast<double>(best) / static_cast<double>(total);

  // (b) per-cluster accuracy at the final round.
  double acc_sum = 0.0;
  for (std::size_t c = 0; c < k; ++c) {
    const auto v = values_of(out.metrics, "cluster:" + std::to_string(c), "accuracy");
    acc_sum += v.empty() ? 0.0 : v.back();
  }
  const double cluster_acc = acc_sum / static_cast<double>(k);

  // (c) a single global model on the same data.
  auto base = m;
  base.topology = TopologySpec{TopologyKind::centralized, n};
  base.strategy.num_clusters = 1;
  const auto single = run_inproc(base, nullptr);
  const double baseline = single.summary.final_accuracy.value_or(1.0);

  const bool pass = recovery >= kMinClusterRecovery && cluster_acc >= kMinClusterAccuracy &&
                    single.summary.status == RunStatus::done && baseline <= kMaxBaselineAccuracy;
  return {pass, "assignment recovery " + fmt(recovery) + ", mean cluster accuracy " + fmt(cluster_acc) +
                    ", single-model baseline " + fmt(baseline)};
}

Verdict ifca_collapse() {
  const auto m = load("ifca_iid.json");
  const auto out = run_inproc(m, nullptr);
  const auto rounds = done_rounds(out);
  if (out.summary.status != RunStatus::done || rounds.size() < kCollapseWindow) {
    return {false, "run ended " + std::string(to_string(out.summary.status)) + ": " + out.summary.error};
  }
  std::map<std::uint32_t, std::size_t> counts;
  std::size_t total = 0;
  for (std::size_t r = rounds.size() - kCollapseWindow; r < rounds.size(); ++r) {
    for (const auto& [id, res] : rounds[r]->received) {
      ++counts[res.cluster_id];
      ++total;
    }
  }
  std::size_t modal = 0;
  for (const auto& [c, n] : counts) modal = std::max(modal, n);
  // Clients that never answered count against the modal share.
  const std::size_t expected = m.topology.num_clients * kCollapseWindow;
  const double share = static_cast<double>(modal) / static_cast<double>(std::max(total, expected));
  return {share >= kMinModalShare, "modal cluster share " + fmt(share) + " over " + std::to_string(kCollapseWindow) +
                                       " rounds"};
}

Verdict dropout_resilience() {
  const auto m = load("dropout.json");
  const auto faulty = run_inproc(m, nullptr);
  auto clean_manifest = m;
  clean_manifest.transport.faults.clear();
  const auto clean = run_inproc(clean_manifest, nullptr);
  const double a = faulty.summary.final_accuracy.value_or(0.0);
  const double b = clean.summary.final_accuracy.value_or(0.0);
  const bool complete = faulty.summary.status == RunStatus::done && faulty.summary.rounds_completed == m.total_rounds;
  const bool pass = complete && clean.summary.status == RunStatus::done && std::abs(a - b) <= kMaxDropoutGap;
  return {pass, std::to_string(faulty.summary.rounds_completed) + "/" + std::to_string(m.total_rounds) +
                    " rounds, accuracy " + fmt(a) + " vs fault-free " + fmt(b) + ", " +
                    std::to_string(faulty.network.dropped) + " messages dropped"};
}

Verdict straggler_timeout() {
  const auto m = load("straggler.json");
  const auto out = run_inproc(m, nullptr);
  const auto participants = values_of(out.metrics, "global", "participants");
  const bool all_seven = participants.size() == m.total_rounds &&
                         std::all_of(participants.begin(), participants.end(),
                                     [](double p) { return p == static_cast<double>(kStragglerParticipants); });
  const bool pass = out.summary.status == RunStatus::done && all_seven;
  std::string seen;
  for (double p : participants) seen += (seen.empty() ? "" : ",") + std::to_string(static_cast<int>(p));
  return {pass, "participants per round [" + seen + "], status " + std::string(to_string(out.summary.status))};
}

Verdict protocol_round_trip() {
  Rng rng(0xACCE97);
  int ok = 0;
  int failures = 0;
  for (int i = 0; i < kMinEnvelopes + 100; ++i) {
    const auto env = fedtopo::testing::random_envelope(rng, static_cast<MsgType>(i % fedtopo::testing::kMsgTypeCount));
    try {
      if (decode_frame(encode_frame(env)) == env) ++ok;
      else ++failures;
    } catch (const Error&) {
      ++failures;
    }
  }

  auto m = load("socket.json");
  fedtopo::testing::TempDir dir("acceptance");
  Repository inproc_repo(dir.path() / "inproc");
  const auto inproc = run_inproc(m, &inproc_repo);
  const auto socket = run_socket(m, dir.path() / "socket", FEDTOPO_CLI);
  const fs::path rel = fs::path(m.run_id) / "models" / "final";
  bool same = false;
  std::string why;
  try {
    same = read_bytes(dir.path() / "inproc" / rel) == read_bytes(dir.path() / "socket" / rel);
    if (!same) why = ", final artifacts differ";
  } catch (const Error& e) {
    why = std::string(", ") + e.what();
  }
  const bool pass = failures == 0 && ok >= kMinEnvelopes && same && inproc.summary.status == RunStatus::done &&
                    socket.status == RunStatus::done;
  return {pass, std::to_string(ok) + " envelopes round-tripped, " + std::to_string(failures) + " failures, socket run " +
                    std::string(to_string(socket.status)) + (same ? ", final artifacts byte-identical" : why)};
}

Verdict determinism() {
  fedtopo::testing::TempDir dir("acceptance");
  std::vector<std::string> names;
  for (const auto& entry : fs::directory_iterator(kManifestDir)) {
    if (entry.path().extension() == ".json") names.push_back(entry.path().filename().string());
  }
  std::sort(names.begin(), names.end());
  std::vector<std::string> mismatched;
  for (const auto& name : names) {
    const auto m = load(name);
    std::string logs[2];
    for (int k = 0; k < 2; ++k) {
      Repository repo(dir.path() / ("pass" + std::to_string(k)));
      run_inproc(m, &repo);
      logs[k] = read_bytes(repo.run_dir(m.run_id) / "metrics.log");
    }
    if (logs[0] != logs[1] || logs[0].empty()) mismatched.push_back(name);
  }
  std::string detail = std::to_string(names.size() - mismatched.size()) + "/" + std::to_string(names.size()) +
                       " manifests give byte-identical metrics.log";
  for (const auto& n : mismatched) detail += ", differs: " + n;
  return {mismatched.empty() && !names.empty(), detail};
}

ModelParams flat(std::vector<double> v) {
  ModelParams p;
  p.layers.push_back(Tensor{1, v.size(), std::move(v)});
  return p;
}

FitResult fit(const std::string& id, std::vector<double> v, std::uint64_t n) {
  FitResult r;
  r.client_id = id;
  r.params = flat(std::move(v));
  r.num_samples = n;
  return r;
}

Verdict fedavg_oracle() {
  int checks = 0;
  int failed = 0;
  auto expect = [&](bool ok) {
    ++checks;
    if (!ok) ++failed;
  };
  expect(fedavg_aggregate(std::vector<FitResult>{fit("a", {1, 3}, 10), fit("b", {3, 1}, 30)}).layers[0].values ==
         std::vector<double>{2.5, 1.5});
  expect(fedavg_aggregate(std::vector<FitResult>{fit("a", {0.1, -7}, 3)}).layers[0].values ==
         std::vector<double>{0.1, -7});
  expect(fedavg_aggregate(std::vector<FitResult>{fit("a", {2, 4}, 1), fit("b", {4, 8}, 1)}).layers[0].values ==
         std::vector<double>{3, 6});
  expect(fedavg_aggregate(std::vector<FitResult>{fit("a", {0.3, 0.3}, 5), fit("b", {0.3, 0.3}, 11), fit("c", {0.3, 0.3}, 2)})
             .layers[0]
             .values == std::vector<double>{0.3, 0.3});

  // Every ordering of the inputs gives the same bits.
  Rng rng(77);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<FitResult> rs;
    for (int c = 0; c < 5; ++c) {
      std::vector<double> v(8);
      for (auto& x : v) x = rng.normal() * 3;
      rs.push_back(fit("client-" + std::to_string(c), v, 1 + rng.below(200)));
    }
    const auto ref = fedavg_aggregate(rs);
    std::vector<std::size_t> idx(rs.size());
    std::iota(idx.begin(), idx.end(), 0);
    do {
      std::vector<FitResult> p;
      for (auto i : idx) p.push_back(rs[i]);
      expect(fedavg_aggregate(p) == ref);
    } while (std::next_permutation(idx.begin(), idx.end()));
  }
  return {failed == 0, std::to_string(checks - failed) + "/" + std::to_string(checks) + " exact checks"};
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Verdict()>>> criteria{
      {"centralized convergence", centralized_convergence},
      {"hierarchical equals centralized", hierarchical_equivalence},
      {"ring of size 1 equals centralized", ring_degeneracy},
      {"IFCA cluster recovery", ifca_recovery},
      {"IFCA collapse on IID data", ifca_collapse},
      {"dropout resilience", dropout_resilience},
      {"straggler timeout", straggler_timeout},
      {"protocol round trip", protocol_round_trip},
      {"determinism", determinism},
      {"FedAvg oracle", fedavg_oracle},
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Verdict v;
    try {
      v = criteria[i].second();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    if (!v.pass) ++failures;
    std::cout << (v.pass ? "PASS" : "FAIL") << " " << (i + 1) << " " << criteria[i].first << ": " << v.detail << std::endl;
  }
  return failures == 0 ? 0 : 1;
}
