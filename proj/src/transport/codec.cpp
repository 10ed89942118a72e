// Copyright 2026 The fedtopo Authors
// SPDX-License-Identifier: Apache-2.0

#include "fedtopo/transport/codec.hpp"

#include <string>

#include "fedtopo/error.hpp"
#include "fedtopo/json_io.hpp"

namespace fedtopo {

void check_frame_size(std::uint64_t body_size) {
  if (body_size > kMaxFrameBody) {
    throw Error(Errc::frame_too_large, std::to_string(body_size) + " byte body");
  }
}

std::vector<std::uint8_t> encode_frame(const Envelope& env) {
  const std::string body = canonical_dump(to_json(env));
  check_frame_size(body.size());
  const auto n = static_cast<std::uint32_t>(body.size());
  std::vector<std::uint8_t> out;
  out.reserve(4 + body.size());
  out.push_back(static_cast<std::uint8_t>(n >> 24));
  out.push_back(static_cast<std::uint8_t>(n >> 16));
  out.push_back(static_cast<std::uint8_t>(n >> 8));
  out.push_back(static_cast<std::uint8_t>(n));
  out.insert(out.end(), body.begin(), body.end());
  return out;
}

std::optional<DecodedFrame> try_decode_frame(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 4) return std::nullopt;
  const std::uint32_t n = (std::uint32_t{bytes[0]} << 24) | (std::uint32_t{bytes[1]} << 16) |
                          (std::uint32_t{bytes[2]} << 8) | std::uint32_t{bytes[3]};
  if (n > kMaxFrameBody) throw Error(Errc::protocol, "length prefix exceeds frame limit");
  if (bytes.size() - 4 < n) return std::nullopt;

  const auto* first = reinterpret_cast<const char*>(bytes.data() + 4);
  Json body;
  try {
    body = Json::parse(first, first + n);
  } catch (const Json::exception& e) {
    throw Error(Errc::protocol, std::string("malformed body: ") + e.what());
  }
  try {
    return DecodedFrame{envelope_from_json(body), 4 + std::size_t{n}};
  } catch (const Json::exception& e) {
    throw Error(Errc::protocol, std::string("malformed envelope: ") + e.what());
  }
}

Envelope decode_frame(std::span<const std::uint8_t> bytes) {
  auto frame = try_decode_frame(bytes);
  if (!frame) {
    throw Error(Errc::incomplete_frame, std::to_string(bytes.size()) + " bytes available");
  }
  return std::move(frame->envelope);
}

}  // namespace fedtopo
