// Copyright 2026 The fedtopo Authors
// SPDX-License-Identifier: Apache-2.0

#include "fedtopo/model.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <string>

#include "fedtopo/error.hpp"
#include "fedtopo/rng.hpp"

namespace fedtopo {

void check_spec(const ModelSpec& spec) {
  if (spec.input_dim == 0) throw Error(Errc::configuration, "model input_dim must be positive");
  if (spec.num_classes < 2) throw Error(Errc::configuration, "model num_classes must be >= 2");
  if (spec.kind == ModelKind::logreg && !spec.hidden_dims.empty()) {
    throw Error(Errc::configuration, "logreg model cannot have hidden layers");
  }
  for (std::size_t h : spec.hidden_dims) {
    if (h == 0) throw Error(Errc::configuration, "hidden layer width must be positive");
  }
}

std::uint64_t spec_hash(const ModelSpec& spec) {
  std::uint64_t h = mix64(spec.kind == ModelKind::logreg ? 1 : 2, spec.input_dim);
  for (std::size_t d : spec.hidden_dims) h = mix64(h, d);
  h = mix64(h, spec.num_classes, spec.hidden_dims.size());
  // Keep it exactly representable as a double for text-based peers.
  return h >> 12;
}

std::vector<std::pair<std::size_t, std::size_t>> layer_shapes(const ModelSpec& spec) {
  std::vector<std::pair<std::size_t, std::size_t>> shapes;
  std::size_t fan_in = spec.input_dim;
  auto add_dense = [&](std::size_t fan_out) {
    shapes.emplace_back(fan_in, fan_out);
    shapes.emplace_back(1, fan_out);
    fan_in = fan_out;
  };
  for (std::size_t h : spec.hidden_dims) add_dense(h);
  add_dense(spec.num_classes);
  return shapes;
}

std::size_t parameter_count(const ModelSpec& spec) {
  std::size_t n = 0;
  for (auto [r, c] : layer_shapes(spec)) n += r * c;
  return n;
}

std::size_t ModelParams::num_values() const noexcept {
  std::size_t n = 0;
  for (const auto& t : layers) n += t.values.size();
  return n;
}

bool all_finite(const ModelParams& params) noexcept {
  for (const auto& t : params.layers) {
    for (double v : t.values) {
      if (!std::isfinite(v)) return false;
    }
  }
  return true;
}

void check_params(const ModelSpec& spec, const ModelParams& params) {
  if (params.spec_hash != spec_hash(spec)) {
    throw Error(Errc::shape, "params were built for a different model spec");
  }
  const auto shapes = layer_shapes(spec);
  if (params.layers.size() != shapes.size()) {
    throw Error(Errc::shape, "expected " + std::to_string(shapes.size()) + " layers, got " +
                                 std::to_string(params.layers.size()));
  }
  for (std::size_t i = 0; i < shapes.size(); ++i) {
    const Tensor& t = params.layers[i];
    if (t.rows != shapes[i].first || t.cols != shapes[i].second ||
        t.values.size() != t.rows * t.cols) {
      throw Error(Errc::shape, "layer " + std::to_string(i) + " has shape (" +
                                   std::to_string(t.rows) + "," + std::to_string(t.cols) + ")");
    }
  }
  if (!all_finite(params)) throw Error(Errc::shape, "params contain non-finite values");
}

ModelParams init_model(const ModelSpec& spec, std::uint64_t seed) {
  check_spec(spec);
  ModelParams params;
  params.spec_hash = spec_hash(spec);
  Rng rng(mix64(seed, params.spec_hash));
  for (auto [rows, cols] : layer_shapes(spec)) {
    Tensor t{rows, cols, std::vector<double>(rows * cols, 0.0)};
    if (params.layers.size() % 2 == 0) {  // weights; biases stay zero
      const double bound = std::sqrt(6.0 / static_cast<double>(rows + cols));
      for (double& v : t.values) v = rng.uniform(-bound, bound);
    }
    params.layers.push_back(std::move(t));
  }
  return params;
}

namespace {

void check_data(const ModelSpec& spec, const Dataset& data) {
  if (data.empty()) throw Error(Errc::empty_partition, "dataset is empty");
  if (data.dim() != spec.input_dim) {
    throw Error(Errc::shape, "data dimension " + std::to_string(data.dim()) +
                                 " does not match model input_dim " +
                                 std::to_string(spec.input_dim));
  }
  if (data.num_classes() > spec.num_classes) {
    throw Error(Errc::shape, "data has more classes than the model outputs");
  }
}

// Activations of every layer for one sample; the last entry holds the
// logits (pre-softmax).
struct Forward {
  std::vector<std::vector<double>> acts;
};

void dense(const Tensor& w, const Tensor& b, std::span<const double> in, std::vector<double>& out) {
  out.assign(b.values.begin(), b.values.end());
  for (std::size_t i = 0; i < w.rows; ++i) {
    const double xi = in[i];
    const double* row = w.values.data() + i * w.cols;
    for (std::size_t j = 0; j < w.cols; ++j) out[j] += xi * row[j];
  }
}

void forward(const ModelParams& p, std::span<const double> x, Forward& f) {
  const std::size_t n_dense = p.layers.size() / 2;
  f.acts.resize(n_dense + 1);
  f.acts[0].assign(x.begin(), x.end());
  for (std::size_t l = 0; l < n_dense; ++l) {
    dense(p.layers[2 * l], p.layers[2 * l + 1], f.acts[l], f.acts[l + 1]);
    if (l + 1 < n_dense) {
      for (double& v : f.acts[l + 1]) v = std::tanh(v);
    }
  }
}

// Softmax in place; returns the log-sum-exp of the logits.
double softmax_inplace(std::vector<double>& z) {
  const double m = *std::max_element(z.begin(), z.end());
  double sum = 0.0;
  for (double& v : z) {
    v = std::exp(v - m);
    sum += v;
  }
  for (double& v : z) v /= sum;
  return m + std::log(sum);
}

double cross_entropy(const std::vector<double>& logits, std::uint32_t label, std::vector<double>& probs) {
  probs = logits;
  const double lse = softmax_inplace(probs);
  return lse - logits[label];
}

std::size_t argmax(const std::vector<double>& v) {
  return static_cast<std::size_t>(std::max_element(v.begin(), v.end()) - v.begin());
}

}  // namespace

std::vector<double> predict_proba(const ModelSpec& spec, const ModelParams& params,
                                  std::span<const double> x) {
  check_params(spec, params);
  if (x.size() != spec.input_dim) throw Error(Errc::shape, "sample width mismatch");
  Forward f;
  forward(params, x, f);
  std::vector<double> probs = f.acts.back();
  softmax_inplace(probs);
  return probs;
}

TrainOutput train_local(const ModelSpec& spec, const ModelParams& params, const Dataset& data,
                        const Hyperparams& hyper, std::uint32_t first_epoch) {
  const auto started = std::chrono::steady_clock::now();
  check_params(spec, params);
  check_data(spec, data);
  if (!(hyper.learning_rate >= 0.0) || !std::isfinite(hyper.learning_rate)) {
    throw Error(Errc::configuration, "learning_rate must be finite and non-negative");
  }
  if (hyper.batch_size == 0) throw Error(Errc::configuration, "batch_size must be >= 1");

  ModelParams w = params;
  ModelParams grad = params;
  const std::size_t n_dense = w.layers.size() / 2;
  const std::size_t n = data.size();

  std::vector<std::size_t> order(n);
  Forward f;
  std::vector<double> probs;
  std::vector<std::vector<double>> delta(n_dense);
  double epoch_loss = 0.0;

  for (std::uint32_t e = 0; e < hyper.local_epochs; ++e) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(mix64(hyper.seed, first_epoch + e));
    rng.shuffle(std::span<std::size_t>(order));
    epoch_loss = 0.0;

    for (std::size_t start = 0; start < n; start += hyper.batch_size) {
      const std::size_t end = std::min(n, start + hyper.batch_size);
      for (auto& t : grad.layers) std::fill(t.values.begin(), t.values.end(), 0.0);

      for (std::size_t k = start; k < end; ++k) {
        const std::size_t idx = order[k];
        const std::uint32_t y = data.label(idx);
        forward(w, data.features(idx), f);
        epoch_loss += cross_entropy(f.acts.back(), y, probs);

        // Output delta = softmax - onehot, then backpropagate through tanh.
        delta[n_dense - 1] = probs;
        delta[n_dense - 1][y] -= 1.0;
        for (std::size_t l = n_dense; l-- > 0;) {
          const std::vector<double>& in = f.acts[l];
          const std::vector<double>& d = delta[l];
          Tensor& gw = grad.layers[2 * l];
          Tensor& gb = grad.layers[2 * l + 1];
          for (std::size_t i = 0; i < gw.rows; ++i) {
            double* row = gw.values.data() + i * gw.cols;
            for (std::size_t j = 0; j < gw.cols; ++j) row[j] += in[i] * d[j];
          }
          for (std::size_t j = 0; j < gb.cols; ++j) gb.values[j] += d[j];
          if (l == 0) break;
          const Tensor& wl = w.layers[2 * l];
          std::vector<double>& prev = delta[l - 1];
          prev.assign(wl.rows, 0.0);
          for (std::size_t i = 0; i < wl.rows; ++i) {
            const double* row = wl.values.data() + i * wl.cols;
            double s = 0.0;
            for (std::size_t j = 0; j < wl.cols; ++j) s += row[j] * d[j];
            const double a = f.acts[l][i];
            prev[i] = s * (1.0 - a * a);
          }
        }
      }

      const double scale = hyper.learning_rate / static_cast<double>(end - start);
      for (std::size_t t = 0; t < w.layers.size(); ++t) {
        auto& wv = w.layers[t].values;
        const auto& gv = grad.layers[t].values;
        for (std::size_t i = 0; i < wv.size(); ++i) wv[i] -= scale * gv[i];
      }
    }
  }

  if (!all_finite(w)) throw Error(Errc::shape, "training diverged to non-finite params");

  TrainOutput out;
  out.params = std::move(w);
  out.metrics.num_samples = n;
  out.metrics.train_loss = hyper.local_epochs > 0 ? epoch_loss / static_cast<double>(n) : 0.0;
  out.metrics.duration_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                                std::chrono::steady_clock::now() - started)
                                .count();
  return out;
}

EvalMetrics evaluate_model(const ModelSpec& spec, const ModelParams& params, const Dataset& data) {
  check_params(spec, params);
  check_data(spec, data);
  Forward f;
  std::vector<double> probs;
  double loss = 0.0;
  std::uint64_t correct = 0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    forward(params, data.features(i), f);
    const std::uint32_t y = data.label(i);
    loss += cross_entropy(f.acts.back(), y, probs);
    if (argmax(f.acts.back()) == y) ++correct;
  }
  EvalMetrics m;
  m.num_samples = data.size();
  m.eval_loss = loss / static_cast<double>(data.size());
  m.accuracy = static_cast<double>(correct) / static_cast<double>(data.size());
  return m;
}

double params_distance(const ModelParams& a, const ModelParams& b) {
  if (a.spec_hash != b.spec_hash || a.layers.size() != b.layers.size()) {
    throw Error(Errc::shape, "cannot compare params of different specs");
  }
  double sum = 0.0;
  for (std::size_t t = 0; t < a.layers.size(); ++t) {
    const auto& av = a.layers[t].values;
    const auto& bv = b.layers[t].values;
    if (av.size() != bv.size()) throw Error(Errc::shape, "layer size mismatch");
    for (std::size_t i = 0; i < av.size(); ++i) {
      const double d = av[i] - bv[i];
      sum += d * d;
    }
  }
  return std::sqrt(sum);
}

}  // namespace fedtopo
