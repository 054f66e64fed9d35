#pragma once

// Binary feature-tensor frame shared by the clip pipeline and the wire:
//   "GSTR" | version u8 = 1 | payload length u32 LE (bytes) | f32 LE row-major [frame][token][dim]

#include <bit>
#include <cstdint>
#include <cstring>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "gestura/error.hpp"

namespace gestura {

inline constexpr std::string_view kTensorMagic = "GSTR";
inline constexpr std::uint8_t kTensorVersion = 1;
inline constexpr std::size_t kTensorHeaderSize = 9;

inline std::string encode_tensor_frame(std::span<const float> values) {
  const std::uint64_t payload = std::uint64_t{values.size()} * 4;
  if (payload > 0xffffffffULL) throw InvalidInput("encode_tensor_frame: payload exceeds 4 GiB");
  std::string out;
  out.reserve(kTensorHeaderSize + payload);
  out.append(kTensorMagic);
  out.push_back(static_cast<char>(kTensorVersion));
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((payload >> (8 * i)) & 0xff));
  for (float v : values) {
    const auto bits = std::bit_cast<std::uint32_t>(v);
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xff));
  }
  return out;
}

/// Throws ProtocolError("features", ...) on a bad header or length.
inline std::vector<float> decode_tensor_frame(std::string_view bytes) {
  if (bytes.size() < kTensorHeaderSize) throw ProtocolError("features", "truncated tensor header");
  if (bytes.substr(0, 4) != kTensorMagic) throw ProtocolError("features", "bad magic, expected GSTR");
  if (static_cast<std::uint8_t>(bytes[4]) != kTensorVersion)
    throw ProtocolError("features", "unsupported tensor frame version " +
                                        std::to_string(static_cast<std::uint8_t>(bytes[4])));
  std::uint32_t payload = 0;
  for (int i = 0; i < 4; ++i)
    payload |= static_cast<std::uint32_t>(static_cast<std::uint8_t>(bytes[5 + i])) << (8 * i);
  if (payload % 4 != 0) throw ProtocolError("features", "payload length not a multiple of 4");
  if (bytes.size() - kTensorHeaderSize != payload)
    throw ProtocolError("features", "payload length " + std::to_string(payload) + " does not match " +
                                        std::to_string(bytes.size() - kTensorHeaderSize) + " bytes present");
  std::vector<float> out(payload / 4);
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data() + kTensorHeaderSize);
  for (std::size_t i = 0; i < out.size(); ++i, p += 4) {
    const std::uint32_t bits = std::uint32_t{p[0]} | (std::uint32_t{p[1]} << 8) |
                               (std::uint32_t{p[2]} << 16) | (std::uint32_t{p[3]} << 24);
    out[i] = std::bit_cast<float>(bits);
  }
  return out;
}

}  // namespace gestura
