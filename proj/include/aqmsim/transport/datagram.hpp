#pragma once

#include <cstdint>
#include <functional>

#include "aqmsim/topology/network.hpp"

namespace aqmsim::transport {

/// Fire-and-forget datagram sender with a fixed destination.
class DatagramSocket {
 public:
  DatagramSocket(topology::Network& net, qdisc::FlowKey key, topology::RouteId route)
      : net_(net), key_(key), route_(route) {}

  /// Injects one packet of `size` bytes.  Throws std::invalid_argument when
  /// size exceeds the MTU or is zero.
  void send(std::uint32_t size, std::uint64_t tag = 0);

  const qdisc::FlowKey& key() const { return key_; }
  std::uint64_t sent_packets() const { return sent_packets_; }
  std::uint64_t sent_bytes() const { return sent_bytes_; }

 private:
  topology::Network& net_;
  qdisc::FlowKey key_;
  topology::RouteId route_;
  std::uint64_t sent_packets_ = 0;
  std::uint64_t sent_bytes_ = 0;
};

/// Counts datagrams arriving for one flow at a node.
class DatagramReceiver {
 public:
  using Handler = std::function<void(const qdisc::Packet&)>;

  DatagramReceiver(topology::Network& net, topology::NodeIndex node, qdisc::FlowKey key,
                   Handler handler = {});
  ~DatagramReceiver();
  DatagramReceiver(const DatagramReceiver&) = delete;
  DatagramReceiver& operator=(const DatagramReceiver&) = delete;

  std::uint64_t received_packets() const { return packets_; }
  std::uint64_t received_bytes() const { return bytes_; }
  /// Sum of one-way delays of received packets, seconds.
  double total_delay_s() const { return delay_sum_; }

 private:
  topology::Network& net_;
  topology::NodeIndex node_;
  qdisc::FlowKey key_;
  Handler handler_;
  std::uint64_t packets_ = 0;
  std::uint64_t bytes_ = 0;
  double delay_sum_ = 0.0;
};

}  // namespace aqmsim::transport
