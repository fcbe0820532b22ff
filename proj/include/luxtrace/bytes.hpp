#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace luxtrace {

/// Lowercase hex of an arbitrary byte range.
inline std::string to_hex(std::span<const std::uint8_t> bytes) {
  static constexpr char digits[] = "0123456789abcdef";
  std::string out;
  out.reserve(bytes.size() * 2);
  for (auto b : bytes) {
    out.push_back(digits[b >> 4]);
    out.push_back(digits[b & 0x0f]);
  }
  return out;
}

namespace detail {
inline int hex_nibble(char c) {
  if (c >= '0' && c <= '9') return c - '0';
  if (c >= 'a' && c <= 'f') return c - 'a' + 10;
  if (c >= 'A' && c <= 'F') return c - 'A' + 10;
  return -1;
}
}  // namespace detail

/// Parses hex (either case, optional 0x prefix). Throws std::invalid_argument.
inline std::vector<std::uint8_t> from_hex(std::string_view text) {
  if (text.size() >= 2 && text[0] == '0' && (text[1] == 'x' || text[1] == 'X'))
    text.remove_prefix(2);
  if (text.size() % 2 != 0)
    throw std::invalid_argument("hex string has odd length");
  std::vector<std::uint8_t> out(text.size() / 2);
  for (std::size_t i = 0; i < out.size(); ++i) {
    int hi = detail::hex_nibble(text[2 * i]);
    int lo = detail::hex_nibble(text[2 * i + 1]);
    if (hi < 0 || lo < 0)
      throw std::invalid_argument("invalid hex digit in '" + std::string(text) + "'");
    out[i] = static_cast<std::uint8_t>((hi << 4) | lo);
  }
  return out;
}

/// Parses exactly N bytes of hex.
template <std::size_t N>
std::array<std::uint8_t, N> fixed_from_hex(std::string_view text) {
  auto v = from_hex(text);
  if (v.size() != N)
    throw std::invalid_argument("expected " + std::to_string(N) + " bytes of hex, got " +
                                std::to_string(v.size()));
  std::array<std::uint8_t, N> out{};
  std::copy(v.begin(), v.end(), out.begin());
  return out;
}

/// 6-byte beacon MAC address.
struct MacAddress {
  std::array<std::uint8_t, 6> bytes{};

  friend auto operator<=>(const MacAddress&, const MacAddress&) = default;

  /// Colon-separated lowercase form, e.g. "c0:00:00:00:00:01".
  std::string to_string() const {
    std::string out;
    for (std::size_t i = 0; i < bytes.size(); ++i) {
      if (i) out.push_back(':');
      out += to_hex(std::span(&bytes[i], 1));
    }
    return out;
  }

  /// Accepts colon-separated or plain 12-digit hex.
  static MacAddress parse(std::string_view text) {
    std::string compact;
    for (char c : text)
      if (c != ':' && c != '-') compact.push_back(c);
    return MacAddress{fixed_from_hex<6>(compact)};
  }

  /// Deterministic locally-administered address for simulation beacon `index`.
  static MacAddress for_index(std::uint32_t index) {
    return MacAddress{{0xc0, 0x00, static_cast<std::uint8_t>(index >> 24),
                       static_cast<std::uint8_t>(index >> 16), static_cast<std::uint8_t>(index >> 8),
                       static_cast<std::uint8_t>(index)}};
  }
};

}  // namespace luxtrace
