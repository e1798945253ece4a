#include "aqmsim/qdisc/flow_key.hpp"

namespace aqmsim::qdisc {

std::array<std::uint8_t, 13> FlowKey::bytes() const {
  return {static_cast<std::uint8_t>(src_addr >> 24), static_cast<std::uint8_t>(src_addr >> 16),
          static_cast<std::uint8_t>(src_addr >> 8),  static_cast<std::uint8_t>(src_addr),
          static_cast<std::uint8_t>(dst_addr >> 24), static_cast<std::uint8_t>(dst_addr >> 16),
          static_cast<std::uint8_t>(dst_addr >> 8),  static_cast<std::uint8_t>(dst_addr),
          static_cast<std::uint8_t>(src_port >> 8),  static_cast<std::uint8_t>(src_port),
          static_cast<std::uint8_t>(dst_port >> 8),  static_cast<std::uint8_t>(dst_port),
          protocol};
}

std::string format_ipv4(std::uint32_t addr) {
  return std::to_string(addr >> 24) + "." + std::to_string((addr >> 16) & 0xff) + "." +
         std::to_string((addr >> 8) & 0xff) + "." + std::to_string(addr & 0xff);
}

std::string FlowKey::to_string() const {
  return format_ipv4(src_addr) + ":" + std::to_string(src_port) + "->" + format_ipv4(dst_addr) +
         ":" + std::to_string(dst_port) + "/" + std::to_string(protocol);
}

}  // namespace aqmsim::qdisc
