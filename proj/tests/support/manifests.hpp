// Copyright 2026 The fedtopo Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>

#include "fedtopo/manifest.hpp"

namespace fedtopo::testing {

// Small centralized linear-data run; callers patch the JSON before parsing.
inline Json small_manifest_json(const std::string& run_id, std::size_t clients, std::uint64_t rounds) {
  return Json{
      {"run_id", run_id},
      {"seed", 11},
      {"total_rounds", rounds},
      {"topology", {{"kind", "centralized"}, {"num_clients", clients}}},
      {"strategy",
       {{"min_available_clients", clients},
        {"min_fit_clients", clients},
        {"fit_fraction", 1.0},
        {"eval_fraction", 1.0},
        {"round_timeout_ms", 1000}}},
      {"model", {{"kind", "logreg"}, {"input_dim", 5}, {"num_classes", 2}}},
      {"hyper", {{"learning_rate", 0.1}, {"local_epochs", 1}, {"batch_size", 10}}},
      {"data",
       {{"generator",
         {{"kind", "linear"}, {"num_samples", 50 * clients}, {"input_dim", 5}, {"num_classes", 2}, {"seed", 3}}},
        {"partition", {{"scheme", "iid"}}}}},
  };
}

inline RunManifest small_manifest(const std::string& run_id, std::size_t clients, std::uint64_t rounds) {
  return manifest_from_json(small_manifest_json(run_id, clients, rounds));
}

}  // namespace fedtopo::testing
