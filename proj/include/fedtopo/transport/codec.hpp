// Copyright 2026 The fedtopo Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "fedtopo/transport/envelope.hpp"

namespace fedtopo {

// Largest body a frame may carry (the length prefix is a u32, capped at 2^31-1).
inline constexpr std::uint64_t kMaxFrameBody = 0x7FFFFFFFULL;

// Throws frame-too-large when body_size exceeds kMaxFrameBody.
void check_frame_size(std::uint64_t body_size);

/// 4-byte big-endian body length N, then N bytes of canonical UTF-8 JSON.
std::vector<std::uint8_t> encode_frame(const Envelope& env);

/// Decodes exactly one frame from the front of `bytes`. Throws
/// incomplete-frame when more bytes are needed, protocol error when the body
/// is malformed.
Envelope decode_frame(std::span<const std::uint8_t> bytes);

struct DecodedFrame {
  Envelope envelope;
  std::size_t consumed = 0;
};

// Stream-friendly variant: nullopt while the frame is incomplete.
std::optional<DecodedFrame> try_decode_frame(std::span<const std::uint8_t> bytes);

}  // namespace fedtopo
