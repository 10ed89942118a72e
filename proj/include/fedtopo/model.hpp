// Copyright 2026 The fedtopo Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "fedtopo/dataset.hpp"

namespace fedtopo {

enum class ModelKind { logreg, mlp };

struct ModelSpec {
  ModelKind kind = ModelKind::logreg;
  std::size_t input_dim = 0;
  std::vector<std::size_t> hidden_dims;  // empty for logreg
  std::size_t num_classes = 2;

  bool operator==(const ModelSpec&) const = default;
};

// Throws configuration error when the spec is unusable.
void check_spec(const ModelSpec& spec);

// Fingerprint of the spec; carried by every ModelParams built from it.
std::uint64_t spec_hash(const ModelSpec& spec);

struct Tensor {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> values;  // row-major, rows * cols

  bool operator==(const Tensor&) const = default;
};

/// Ordered layers: for every dense layer a (fan_in, fan_out) weight tensor
/// followed by a (1, fan_out) bias tensor.
struct ModelParams {
  std::vector<Tensor> layers;
  std::uint64_t spec_hash = 0;

  std::size_t num_values() const noexcept;
  bool operator==(const ModelParams&) const = default;
};

// Closed-form layer shapes for a spec, as (rows, cols) pairs.
std::vector<std::pair<std::size_t, std::size_t>> layer_shapes(const ModelSpec& spec);
std::size_t parameter_count(const ModelSpec& spec);

// Throws shape error unless params match the spec layout and are finite.
void check_params(const ModelSpec& spec, const ModelParams& params);
bool all_finite(const ModelParams& params) noexcept;

struct Hyperparams {
  double learning_rate = 0.1;
  std::uint32_t local_epochs = 1;
  std::uint32_t batch_size = 10;
  std::uint64_t seed = 0;

  bool operator==(const Hyperparams&) const = default;
};

struct TrainMetrics {
  double train_loss = 0.0;
  std::uint64_t num_samples = 0;
  std::int64_t duration_ms = 0;

  bool operator==(const TrainMetrics&) const = default;
};

struct EvalMetrics {
  double eval_loss = 0.0;
  double accuracy = 0.0;
  std::uint64_t num_samples = 0;

  bool operator==(const EvalMetrics&) const = default;
};

struct TrainOutput {
  ModelParams params;
  TrainMetrics metrics;
};

ModelParams init_model(const ModelSpec& spec, std::uint64_t seed);

/// Mini-batch SGD on mean cross-entropy. Epoch e (counting from
/// first_epoch) shuffles with a stream seeded by mix64(hyper.seed, e), so
/// splitting N epochs into consecutive calls reproduces a single call
/// bit for bit.
TrainOutput train_local(const ModelSpec& spec, const ModelParams& params,
                        const Dataset& data, const Hyperparams& hyper,
                        std::uint32_t first_epoch = 0);

EvalMetrics evaluate_model(const ModelSpec& spec, const ModelParams& params,
                           const Dataset& data);

double params_distance(const ModelParams& a, const ModelParams& b);

// Class probabilities for one sample.
std::vector<double> predict_proba(const ModelSpec& spec, const ModelParams& params,
                                  std::span<const double> x);

}  // namespace fedtopo
