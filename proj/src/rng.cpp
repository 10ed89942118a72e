// Copyright 2026 The fedtopo Authors
// SPDX-License-Identifier: Apache-2.0

#include "fedtopo/rng.hpp"

#include <cmath>
#include <numbers>

#include "fedtopo/error.hpp"

namespace fedtopo {

double Rng::uniform() noexcept {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

std::uint64_t Rng::below(std::uint64_t n) noexcept {
  // Reject the top partial bucket so every residue is equally likely.
  const std::uint64_t limit = UINT64_MAX - (UINT64_MAX % n);
  std::uint64_t x = next_u64();
  while (x >= limit) x = next_u64();
  return x % n;
}

double Rng::normal() noexcept {
  double u1 = uniform();
  while (u1 <= 0.0) u1 = uniform();
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

double Rng::gamma(double shape) {
  if (!(shape > 0.0) || !std::isfinite(shape)) {
    throw Error(Errc::configuration, "gamma shape must be positive and finite");
  }
  if (shape < 1.0) {
    // Boost: G(a) = G(a + 1) * U^(1/a).
    double u = uniform();
    while (u <= 0.0) u = uniform();
    return gamma(shape + 1.0) * std::pow(u, 1.0 / shape);
  }
  const double d = shape - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    double x = normal();
    double v = 1.0 + c * x;
    if (v <= 0.0) continue;
    v = v * v * v;
    const double u = uniform();
    if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
    if (u > 0.0 && std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
  }
}

std::string_view to_string(Errc code) {
  switch (code) {
    case Errc::configuration: return "configuration error";
    case Errc::shape: return "shape error";
    case Errc::empty_partition: return "empty-partition error";
    case Errc::empty_aggregation: return "empty-aggregation error";
    case Errc::insufficient_clients: return "insufficient-clients error";
    case Errc::topology: return "topology error";
    case Errc::ring_collapsed: return "ring-collapsed error";
    case Errc::frame_too_large: return "frame-too-large error";
    case Errc::incomplete_frame: return "incomplete-frame";
    case Errc::protocol: return "protocol error";
    case Errc::not_found: return "not-found error";
    case Errc::validation: return "validation error";
    case Errc::storage: return "storage error";
    case Errc::startup_failure: return "startup-failure";
    case Errc::round_abort: return "round-abort error";
  }
  return "unknown error";
}

}  // namespace fedtopo
