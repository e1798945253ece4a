#include "aqmsim/transport/datagram.hpp"

#include <stdexcept>

#include "aqmsim/transport/connection.hpp"

namespace aqmsim::transport {

void DatagramSocket::send(std::uint32_t size, std::uint64_t tag) {
  if (size == 0 || size > kMtu) {
    throw std::invalid_argument("datagram size " + std::to_string(size) + " outside 1.." +
                                std::to_string(kMtu));
  }
  qdisc::Packet p;
  p.key = key_;
  p.size = size;
  p.kind = qdisc::PacketKind::Datagram;
  p.route = route_;
  p.tag = tag;
  ++sent_packets_;
  sent_bytes_ += size;
  net_.send(std::move(p));
}

DatagramReceiver::DatagramReceiver(topology::Network& net, topology::NodeIndex node,
                                   qdisc::FlowKey key, Handler handler)
    : net_(net), node_(node), key_(key), handler_(std::move(handler)) {
  net_.bind(node_, key_, [this](qdisc::Packet&& p) {
    ++packets_;
    bytes_ += p.size;
    delay_sum_ += (net_.sim().now() - p.created).to_seconds();
    if (handler_) handler_(p);
  });
}

DatagramReceiver::~DatagramReceiver() { net_.unbind(node_, key_); }

}  // namespace aqmsim::transport
