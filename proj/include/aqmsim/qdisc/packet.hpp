#pragma once

#include <array>
#include <cstdint>

#include "aqmsim/engine/time.hpp"
#include "aqmsim/qdisc/flow_key.hpp"

namespace aqmsim::qdisc {

enum class PacketKind : std::uint8_t { Data, Ack, Syn, SynAck, Datagram };

/// A simulated packet.  Payload bytes are not carried; `size` is the on-wire
/// length and the transport fields describe what the payload would contain.
struct SackBlock {
  std::uint64_t start = 0;
  std::uint64_t end = 0;
};

struct Packet {
  std::uint64_t uid = 0;
  FlowKey key;
  std::uint32_t size = 0;
  PacketKind kind = PacketKind::Datagram;
  engine::Time created;
  engine::Time enqueued;

  // Source route: index into the network's route table and position on it.
  std::uint32_t route = 0;
  std::uint16_t hop = 0;

  // Transport header.
  std::uint16_t subflow = 0;
  std::uint64_t seq = 0;
  std::uint32_t len = 0;
  std::uint64_t dseq = 0;
  std::uint64_t ack = 0;
  engine::Time ts;
  engine::Time ts_echo;
  std::array<SackBlock, 3> sack{};
  std::uint8_t sack_count = 0;

  /// Free for the application (e.g. a datagram sequence number).
  std::uint64_t tag = 0;
};

}  // namespace aqmsim::qdisc
