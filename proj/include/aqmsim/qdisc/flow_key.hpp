#pragma once

#include <array>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>

namespace aqmsim::qdisc {

inline constexpr std::uint8_t kProtoTcp = 6;
inline constexpr std::uint8_t kProtoUdp = 17;

/// The classic five-tuple identifying a transport flow.
struct FlowKey {
  std::uint32_t src_addr = 0;
  std::uint32_t dst_addr = 0;
  std::uint16_t src_port = 0;
  std::uint16_t dst_port = 0;
  std::uint8_t protocol = 0;

  auto operator<=>(const FlowKey&) const = default;

  FlowKey reversed() const { return {dst_addr, src_addr, dst_port, src_port, protocol}; }

  /// Network-byte-order serialization fed to the flow hash (13 bytes).
  std::array<std::uint8_t, 13> bytes() const;

  std::string to_string() const;
};

std::string format_ipv4(std::uint32_t addr);

/// Table hash for containers; the qdisc classifier uses lookup3 instead.
struct FlowKeyHash {
  std::size_t operator()(const FlowKey& k) const noexcept {
    std::uint64_t x = (std::uint64_t{k.src_addr} << 32) ^ k.dst_addr;
    x ^= (std::uint64_t{k.src_port} << 40) ^ (std::uint64_t{k.dst_port} << 16) ^ k.protocol;
    x ^= x >> 33;
    x *= 0xff51afd7ed558ccdULL;
    x ^= x >> 33;
    return static_cast<std::size_t>(x);
  }
};

}  // namespace aqmsim::qdisc
