#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace biasbench {

/// 64-bit FNV-1a. Stable across platforms; not a cryptographic hash.
class Fnv1a {
public:
  void update(std::string_view bytes) noexcept {
    for (unsigned char c : bytes) {
      state_ ^= c;
      state_ *= 0x100000001B3ULL;
    }
  }
  std::uint64_t value() const noexcept { return state_; }
  /// 16 lowercase hex digits.
  std::string hex() const;

private:
  std::uint64_t state_ = 0xCBF29CE484222325ULL;
};

inline std::string digest_hex(std::string_view bytes) {
  Fnv1a h;
  h.update(bytes);
  return h.hex();
}

}  // namespace biasbench
