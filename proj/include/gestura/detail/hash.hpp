#pragma once

#include <bit>
#include <cstdint>
#include <cstdio>
#include <span>
#include <string>
#include <string_view>

namespace gestura::detail {

/// 64-bit FNV-1a. Used for parameter digests and cache keys, not security.
class Fnv1a {
 public:
  Fnv1a& update(std::span<const std::byte> bytes) noexcept {
    for (auto b : bytes) {
      state_ ^= static_cast<std::uint64_t>(b);
      state_ *= 0x100000001b3ULL;
    }
    return *this;
  }

  Fnv1a& update(std::string_view text) noexcept {
    return update(std::as_bytes(std::span(text.data(), text.size())));
  }

  Fnv1a& update(std::span<const double> values) noexcept {
    return update(std::as_bytes(values));
  }

  Fnv1a& update(std::uint64_t value) noexcept {
    std::byte raw[8];
    for (int i = 0; i < 8; ++i) raw[i] = static_cast<std::byte>((value >> (8 * i)) & 0xff);
    return update(std::span<const std::byte>(raw, 8));
  }

  std::uint64_t value() const noexcept { return state_; }

  std::string hex() const {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(state_));
    return buf;
  }

 private:
  std::uint64_t state_ = 0xcbf29ce484222325ULL;
};

}  // namespace gestura::detail
