#pragma once

// Beacon packet preimage layout and ephemeral ID derivation:
//   preimage = device_id (18) || battery (1) || epoch-floored UNIX seconds (8, big-endian)
//   id       = XOR-fold 32 -> 16 -> 8 -> 4 of SHA-256(preimage)
// The secret device ID is the only secret input and acts as the hash key.

#include <openssl/evp.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>

#include "luxtrace/bytes.hpp"
#include "luxtrace/energy.hpp"
#include "luxtrace/radio.hpp"

namespace luxtrace {

inline constexpr std::uint64_t kDefaultEpochS = 900;
inline constexpr std::size_t kDeviceIdSize = 18;
inline constexpr std::size_t kPreimageSize = 27;
inline constexpr std::size_t kDigestSize = 32;
inline constexpr std::size_t kEphemeralIdSize = 4;

using Digest = std::array<std::uint8_t, kDigestSize>;

struct DeviceId {
  std::array<std::uint8_t, kDeviceIdSize> bytes{};
  friend auto operator<=>(const DeviceId&, const DeviceId&) = default;
  static DeviceId from_hex(std::string_view text) { return {fixed_from_hex<kDeviceIdSize>(text)}; }
};

struct BatteryStatus {
  std::uint8_t byte = 0;
  friend auto operator<=>(const BatteryStatus&, const BatteryStatus&) = default;
};

inline constexpr double kBatteryScaleMinV = 1.8;
inline constexpr double kBatteryScaleMaxV = 5.5;

/// round(255 * clamp((V - 1.8) / (5.5 - 1.8), 0, 1)). Monotone and total (NaN maps to 0).
inline BatteryStatus battery_status_from_voltage(double supercap_v) {
  double x = (supercap_v - kBatteryScaleMinV) / (kBatteryScaleMaxV - kBatteryScaleMinV);
  if (!(x > 0.0)) x = 0.0;
  if (x > 1.0) x = 1.0;
  return {static_cast<std::uint8_t>(std::lround(255.0 * x))};
}

struct EphemeralId {
  std::array<std::uint8_t, kEphemeralIdSize> bytes{};

  friend auto operator<=>(const EphemeralId&, const EphemeralId&) = default;

  std::uint32_t value() const {
    return (std::uint32_t{bytes[0]} << 24) | (std::uint32_t{bytes[1]} << 16) |
           (std::uint32_t{bytes[2]} << 8) | std::uint32_t{bytes[3]};
  }
  static EphemeralId from_value(std::uint32_t v) {
    return {{static_cast<std::uint8_t>(v >> 24), static_cast<std::uint8_t>(v >> 16),
             static_cast<std::uint8_t>(v >> 8), static_cast<std::uint8_t>(v)}};
  }
  std::string to_hex() const { return luxtrace::to_hex(bytes); }
  static EphemeralId from_hex(std::string_view text) { return {fixed_from_hex<kEphemeralIdSize>(text)}; }
};

struct PacketPreimage {
  DeviceId device_id;
  BatteryStatus battery;
  std::uint64_t timestamp_s = 0;  // already floored to the epoch

  friend bool operator==(const PacketPreimage&, const PacketPreimage&) = default;

  std::array<std::uint8_t, kPreimageSize> serialize() const {
    std::array<std::uint8_t, kPreimageSize> out{};
    std::copy(device_id.bytes.begin(), device_id.bytes.end(), out.begin());
    out[kDeviceIdSize] = battery.byte;
    for (int i = 0; i < 8; ++i)
      out[kDeviceIdSize + 1 + i] = static_cast<std::uint8_t>(timestamp_s >> (8 * (7 - i)));
    return out;
  }

  static PacketPreimage deserialize(std::span<const std::uint8_t> raw) {
    if (raw.size() != kPreimageSize)
      throw std::length_error("preimage must be 27 bytes, got " + std::to_string(raw.size()));
    PacketPreimage p;
    std::copy_n(raw.begin(), kDeviceIdSize, p.device_id.bytes.begin());
    p.battery.byte = raw[kDeviceIdSize];
    for (int i = 0; i < 8; ++i) p.timestamp_s = (p.timestamp_s << 8) | raw[kDeviceIdSize + 1 + i];
    return p;
  }
};

inline PacketPreimage encode_preimage(const DeviceId& device_id, BatteryStatus battery,
                                      std::uint64_t timestamp_s, std::uint64_t epoch_s = kDefaultEpochS) {
  if (epoch_s == 0) throw std::invalid_argument("epoch_s must be > 0");
  return {device_id, battery, (timestamp_s / epoch_s) * epoch_s};
}

inline Digest sha256(std::span<const std::uint8_t> data) {
  Digest out{};
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), out.data(), &len, EVP_sha256(), nullptr) != 1 ||
      len != kDigestSize)
    throw std::runtime_error("SHA-256 computation failed");
  return out;
}

/// XOR-folds a 32-byte digest in halves down to 4 bytes.
inline EphemeralId fold_hash(std::span<const std::uint8_t> digest) {
  if (digest.size() != kDigestSize)
    throw std::length_error("fold_hash expects a 32-byte digest, got " + std::to_string(digest.size()));
  Digest buf{};
  std::copy(digest.begin(), digest.end(), buf.begin());
  for (std::size_t half = kDigestSize / 2; half >= kEphemeralIdSize; half /= 2)
    for (std::size_t i = 0; i < half; ++i) buf[i] ^= buf[i + half];
  EphemeralId id;
  std::copy_n(buf.begin(), kEphemeralIdSize, id.bytes.begin());
  return id;
}

inline EphemeralId ephemeral_id(const PacketPreimage& preimage) {
  auto raw = preimage.serialize();
  return fold_hash(sha256(raw));
}

struct BeaconConfig {
  MacAddress mac;
  DeviceId device_id;
  double adv_interval_ms = kReferenceAdvIntervalMs;
  TxPower tx = kDefaultTx;
  std::uint64_t epoch_s = kDefaultEpochS;
};

struct BeaconPayload {
  MacAddress mac;
  EphemeralId id;
  TxPower tx;
  BatteryStatus battery;
};

/// The advertisement a beacon emits at `clock_s`; nullopt when the beacon is dead.
inline std::optional<BeaconPayload> make_broadcast(const BeaconConfig& config, std::uint64_t clock_s,
                                                   const EnergyState& energy) {
  if (!energy.alive) return std::nullopt;
  auto battery = battery_status_from_voltage(energy.supercap_v);
  auto pre = encode_preimage(config.device_id, battery, clock_s, config.epoch_s);
  return BeaconPayload{config.mac, ephemeral_id(pre), config.tx, battery};
}

}  // namespace luxtrace

template <>
struct std::hash<luxtrace::EphemeralId> {
  std::size_t operator()(const luxtrace::EphemeralId& id) const noexcept {
    return std::hash<std::uint32_t>{}(id.value());
  }
};
