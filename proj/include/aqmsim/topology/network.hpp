#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "aqmsim/engine/simulator.hpp"
#include "aqmsim/qdisc/fq_pie.hpp"
#include "aqmsim/qdisc/packet.hpp"
#include "aqmsim/qdisc/pie.hpp"
#include "aqmsim/qdisc/qdisc.hpp"

namespace aqmsim::topology {

using engine::Time;
using qdisc::FlowKey;
using qdisc::Packet;

using NodeIndex = std::uint32_t;
using InterfaceIndex = std::uint32_t;
using RouteId = std::uint32_t;

enum class QdiscKind { DropTail, Pie, FqPie };

std::string_view to_string(QdiscKind kind);
std::optional<QdiscKind> parse_qdisc_kind(std::string_view text);

struct QdiscSpec {
  QdiscKind kind = QdiscKind::DropTail;
  std::uint32_t droptail_limit_packets = 1000;
  qdisc::PieParams pie;
  qdisc::FqPieParams fq_pie;
};

struct LinkSpec {
  std::string a;
  std::string b;
  double rate_ab_bps = 0;
  double rate_ba_bps = 0;
  Time delay_ab;
  Time delay_ba;
};

struct RouteSpec {
  std::string name;
  std::vector<std::string> hops;
};

struct TopologySpec {
  std::vector<std::string> nodes;
  std::vector<LinkSpec> links;
  std::vector<RouteSpec> routes;
  /// Qdisc per directed interface label "A->B"; all others get `default_qdisc`.
  std::map<std::string, QdiscSpec> interface_qdiscs;
  QdiscSpec default_qdisc;
};

/// One direction of a link: an egress qdisc feeding a non-preemptive
/// transmitter, followed by a fixed propagation delay.
struct Interface {
  std::string label;  // "A->B"
  NodeIndex from = 0;
  NodeIndex to = 0;
  double rate_bps = 0;
  Time delay;
  std::unique_ptr<qdisc::Qdisc> qdisc;
  bool configured_qdisc = false;  // named in interface_qdiscs
  /// The transmitter is idle from this time on.
  Time busy_until;
  bool kick_pending = false;
  /// Packets on the wire, in arrival order (constant delay keeps it FIFO).
  std::deque<Packet> wire;
  std::uint64_t tx_packets = 0;
  std::uint64_t tx_bytes = 0;
};

struct Route {
  NodeIndex src = 0;
  NodeIndex dst = 0;
  std::vector<NodeIndex> nodes;
  std::vector<InterfaceIndex> interfaces;
};

/// Per-class packet accounting across the whole network.
struct NetworkCounters {
  std::uint64_t injected = 0;
  std::uint64_t delivered = 0;
  std::uint64_t dropped = 0;
  std::uint64_t unclaimed = 0;  // arrived but no endpoint bound
  std::uint64_t dropped_stream = 0;
  std::uint64_t dropped_datagram = 0;

  std::uint64_t in_network() const { return injected - delivered - dropped - unclaimed; }
};

/// The simulated network: nodes, directed interfaces with qdiscs, source
/// routes, and local delivery to bound endpoints.
class Network {
 public:
  using Sink = std::function<void(Packet&&)>;
  using TxObserver = std::function<void(InterfaceIndex, const Packet&)>;

  /// Throws ConfigError on dangling node names, duplicate links, bad rates or
  /// routes that do not follow links.
  Network(engine::Simulator& sim, std::uint64_t master_seed, const TopologySpec& spec);
  Network(const Network&) = delete;
  Network& operator=(const Network&) = delete;

  engine::Simulator& sim() { return sim_; }
  const engine::Simulator& sim() const { return sim_; }

  std::size_t node_count() const { return labels_.size(); }
  std::size_t link_count() const { return interfaces_.size() / 2; }
  NodeIndex node(std::string_view label) const;  // throws ConfigError
  const std::string& label(NodeIndex n) const { return labels_[n]; }
  std::uint32_t address(NodeIndex n) const { return 0x0A000001u + (n << 8); }

  std::size_t interface_count() const { return interfaces_.size(); }
  Interface& interface(InterfaceIndex i) { return interfaces_[i]; }
  const Interface& interface(InterfaceIndex i) const { return interfaces_[i]; }
  std::optional<InterfaceIndex> find_interface(std::string_view label) const;
  /// Interfaces listed in the topology's interface_qdiscs, in label order.
  std::vector<InterfaceIndex> configured_interfaces() const;

  /// Shortest path by hop count (ties broken by node index), cached.
  RouteId route_between(NodeIndex src, NodeIndex dst);
  RouteId named_route(std::string_view name) const;  // throws ConfigError
  RouteId reverse(RouteId r);
  const Route& route(RouteId r) const { return routes_[r]; }

  /// Injects a packet at the first hop of `pkt.route`.  Assigns uid if zero.
  void send(Packet pkt);

  /// Starts serializing `pkt` on an idle interface, bypassing its qdisc.
  /// Returns the time the packet will arrive at the far end.
  Time transmit(InterfaceIndex iface, Packet pkt);

  /// Packets reaching `node` with exactly `key` go to `sink`.
  void bind(NodeIndex node, const FlowKey& key, Sink sink);
  void unbind(NodeIndex node, const FlowKey& key);

  std::uint16_t allocate_port(NodeIndex node);
  std::uint64_t next_uid() { return ++uid_; }

  const NetworkCounters& counters() const { return counters_; }

  /// Called as each packet starts serializing on any interface.
  void set_tx_observer(TxObserver obs) { tx_observer_ = std::move(obs); }

 private:
  void enqueue(InterfaceIndex iface, Packet pkt);
  void start_transmission(InterfaceIndex iface);
  void schedule_kick(InterfaceIndex iface);
  void launch(InterfaceIndex iface, Packet pkt);
  void arrive(InterfaceIndex via, Packet pkt);
  RouteId add_route(std::vector<NodeIndex> nodes);

  engine::Simulator& sim_;
  std::vector<std::string> labels_;
  std::unordered_map<std::string, NodeIndex> by_label_;
  std::vector<Interface> interfaces_;
  std::map<std::pair<NodeIndex, NodeIndex>, InterfaceIndex> adjacency_;
  std::vector<Route> routes_;
  std::map<std::string, RouteId, std::less<>> named_routes_;
  std::map<std::pair<NodeIndex, NodeIndex>, RouteId> shortest_;
  std::map<RouteId, RouteId> reversed_;
  std::vector<std::unordered_map<FlowKey, std::shared_ptr<Sink>, qdisc::FlowKeyHash>> sinks_;
  std::vector<std::uint16_t> next_port_;
  std::uint64_t uid_ = 0;
  NetworkCounters counters_;
  TxObserver tx_observer_;
};

}  // namespace aqmsim::topology
