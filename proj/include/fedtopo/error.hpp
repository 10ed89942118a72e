// Copyright 2026 The fedtopo Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace fedtopo {

enum class Errc {
  configuration,
  shape,
  empty_partition,
  empty_aggregation,
  insufficient_clients,
  topology,
  ring_collapsed,
  frame_too_large,
  incomplete_frame,
  protocol,
  not_found,
  validation,
  storage,
  startup_failure,
  round_abort,
};

std::string_view to_string(Errc code);

// Single exception type for the library; callers branch on code().
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what),
        code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace fedtopo
