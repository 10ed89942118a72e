// Copyright 2026 The fedtopo Authors
// SPDX-License-Identifier: Apache-2.0

#include "fedtopo/strategy.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "fedtopo/error.hpp"
#include "fedtopo/rng.hpp"

namespace fedtopo {

std::vector<std::string> validate_strategy(const StrategyConfig& c) {
  std::vector<std::string> errors;
  if (c.min_available_clients < 1) errors.emplace_back("min_available_clients must be >= 1");
  if (c.min_fit_clients < 1) errors.emplace_back("min_fit_clients must be >= 1");
  if (c.min_fit_clients > c.min_available_clients) {
    errors.emplace_back("min_fit_clients exceeds min_available_clients");
  }
  if (!(c.fit_fraction > 0.0 && c.fit_fraction <= 1.0)) errors.emplace_back("fit_fraction must be in (0, 1]");
  if (!(c.eval_fraction > 0.0 && c.eval_fraction <= 1.0)) {
    errors.emplace_back("eval_fraction must be in (0, 1]");
  }
  if (c.round_timeout_ms <= 0) errors.emplace_back("round_timeout_ms must be positive");
  if (c.num_clusters < 1) errors.emplace_back("num_clusters must be >= 1");
  return errors;
}

std::vector<ClientHandle> sample_clients(std::span<const ClientHandle> available, double fraction,
                                         std::size_t min_n, const std::set<std::string>& blacklist,
                                         std::uint64_t rng_seed) {
  std::vector<ClientHandle> eligible;
  for (const auto& h : available) {
    if (!blacklist.contains(h.client_id)) eligible.push_back(h);
  }
  std::sort(eligible.begin(), eligible.end(),
            [](const ClientHandle& a, const ClientHandle& b) { return a.client_id < b.client_id; });
  if (eligible.size() < min_n) {
    throw Error(Errc::insufficient_clients, std::to_string(eligible.size()) + " eligible, " +
                                                std::to_string(min_n) + " required");
  }
  const double scaled = fraction * static_cast<double>(eligible.size());
  // The epsilon keeps products like 0.1 * 30 from rounding up a whole client.
  std::size_t k = static_cast<std::size_t>(std::ceil(scaled - 1e-9));
  k = std::min(eligible.size(), std::max(min_n, k));

  Rng rng(rng_seed);
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.below(eligible.size() - i));
    std::swap(eligible[i], eligible[j]);
  }
  eligible.resize(k);
  std::sort(eligible.begin(), eligible.end(),
            [](const ClientHandle& a, const ClientHandle& b) { return a.client_id < b.client_id; });
  return eligible;
}

double weighted_mean(std::span<const double> values, std::span<const double> weights) {
  if (values.empty() || values.size() != weights.size()) {
    throw Error(Errc::empty_aggregation, "weighted mean over no values");
  }
  double total = 0.0;
  for (double w : weights) total += w;
  if (!(total > 0.0)) throw Error(Errc::empty_aggregation, "weights sum to zero");
  const double ref = values[0];
  double lo = ref, hi = ref, acc = ref;
  for (std::size_t i = 0; i < values.size(); ++i) {
    acc += (weights[i] / total) * (values[i] - ref);
    lo = std::min(lo, values[i]);
    hi = std::max(hi, values[i]);
  }
  return std::clamp(acc, lo, hi);
}

ModelParams fedavg_aggregate(std::span<const FitResult> results) {
  if (results.empty()) throw Error(Errc::empty_aggregation, "no results to aggregate");

  std::vector<const FitResult*> sorted;
  sorted.reserve(results.size());
  for (const auto& r : results) sorted.push_back(&r);
  std::sort(sorted.begin(), sorted.end(),
            [](const FitResult* a, const FitResult* b) { return a->client_id < b->client_id; });
  for (std::size_t i = 1; i < sorted.size(); ++i) {
    if (sorted[i]->client_id == sorted[i - 1]->client_id) {
      throw Error(Errc::validation, "duplicate result from " + sorted[i]->client_id);
    }
  }

  const ModelParams& ref = sorted.front()->params;
  double total = 0.0;
  for (const FitResult* r : sorted) {
    if (r->params.spec_hash != ref.spec_hash || r->params.layers.size() != ref.layers.size()) {
      throw Error(Errc::shape, "result from " + r->client_id + " has a different model spec");
    }
    for (std::size_t t = 0; t < ref.layers.size(); ++t) {
      if (r->params.layers[t].rows != ref.layers[t].rows ||
          r->params.layers[t].cols != ref.layers[t].cols ||
          r->params.layers[t].values.size() != ref.layers[t].values.size()) {
        throw Error(Errc::shape, "result from " + r->client_id + " has mismatched layer " +
                                     std::to_string(t));
      }
    }
    total += static_cast<double>(r->num_samples);
  }
  if (!(total > 0.0)) throw Error(Errc::empty_aggregation, "results carry zero samples");

  std::vector<double> weights;
  weights.reserve(sorted.size());
  for (const FitResult* r : sorted) weights.push_back(static_cast<double>(r->num_samples) / total);

  ModelParams out = ref;
  for (std::size_t t = 0; t < out.layers.size(); ++t) {
    auto& dst = out.layers[t].values;
    for (std::size_t i = 0; i < dst.size(); ++i) {
      const double base = dst[i];
      double acc = base, lo = base, hi = base;
      for (std::size_t k = 0; k < sorted.size(); ++k) {
        const double v = sorted[k]->params.layers[t].values[i];
        acc += weights[k] * (v - base);
        lo = std::min(lo, v);
        hi = std::max(hi, v);
      }
      dst[i] = std::clamp(acc, lo, hi);
    }
  }
  if (!all_finite(out)) throw Error(Errc::shape, "aggregate is not finite");
  return out;
}

std::size_t ifca_assign(const ModelSpec& spec, std::span<const ModelParams> cluster_params,
                        const Dataset& local_train) {
  if (cluster_params.empty()) throw Error(Errc::configuration, "no cluster models");
  std::size_t best = 0;
  double best_loss = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < cluster_params.size(); ++k) {
    const double loss = evaluate_model(spec, cluster_params[k], local_train).eval_loss;
    if (loss < best_loss) {
      best_loss = loss;
      best = k;
    }
  }
  return best;
}

std::vector<ModelParams> ifca_aggregate(std::span<const ModelParams> cluster_params,
                                        std::span<const FitResult> results) {
  std::vector<std::vector<FitResult>> per_cluster(cluster_params.size());
  for (const auto& r : results) {
    if (r.cluster_id >= cluster_params.size()) {
      throw Error(Errc::validation, "result from " + r.client_id + " names cluster " +
                                        std::to_string(r.cluster_id));
    }
    per_cluster[r.cluster_id].push_back(r);
  }
  std::vector<ModelParams> out(cluster_params.begin(), cluster_params.end());
  for (std::size_t k = 0; k < out.size(); ++k) {
    if (!per_cluster[k].empty()) out[k] = fedavg_aggregate(per_cluster[k]);
  }
  return out;
}

EvalAggregate aggregate_evaluate(std::span<const std::pair<std::string, EvalMetrics>> evals) {
  std::vector<const std::pair<std::string, EvalMetrics>*> sorted;
  for (const auto& e : evals) {
    if (e.second.num_samples > 0) sorted.push_back(&e);
  }
  if (sorted.empty()) throw Error(Errc::empty_aggregation, "no evaluation results");
  std::sort(sorted.begin(), sorted.end(), [](auto* a, auto* b) { return a->first < b->first; });

  std::vector<double> losses, accs, weights;
  EvalAggregate out;
  for (auto* e : sorted) {
    losses.push_back(e->second.eval_loss);
    accs.push_back(e->second.accuracy);
    weights.push_back(static_cast<double>(e->second.num_samples));
    out.num_samples += e->second.num_samples;
  }
  out.aggregated_eval_loss = weighted_mean(losses, weights);
  out.global_accuracy = weighted_mean(accs, weights);
  return out;
}

}  // namespace fedtopo
