#include "aqmsim/topology/network.hpp"

#include <algorithm>
#include <deque>
#include <set>

#include "aqmsim/qdisc/droptail.hpp"
#include "aqmsim/topology/config_error.hpp"

namespace aqmsim::topology {

std::string_view to_string(QdiscKind kind) {
  switch (kind) {
    case QdiscKind::DropTail: return "droptail";
    case QdiscKind::Pie: return "pie";
    case QdiscKind::FqPie: return "fq_pie";
  }
  return "?";
}

std::optional<QdiscKind> parse_qdisc_kind(std::string_view text) {
  if (text == "droptail") return QdiscKind::DropTail;
  if (text == "pie") return QdiscKind::Pie;
  if (text == "fq_pie") return QdiscKind::FqPie;
  return std::nullopt;
}

namespace {

std::unique_ptr<qdisc::Qdisc> make_qdisc(engine::Simulator& sim, std::uint64_t seed,
                                         const std::string& label, const QdiscSpec& spec) {
  engine::RngStream rng(seed, "qdisc:" + label);
  switch (spec.kind) {
    case QdiscKind::DropTail:
      return std::make_unique<qdisc::DropTailQueue>(sim, spec.droptail_limit_packets);
    case QdiscKind::Pie:
      return std::make_unique<qdisc::PieQueue>(sim, spec.pie, std::move(rng));
    case QdiscKind::FqPie:
      return std::make_unique<qdisc::FqPieQueue>(sim, spec.fq_pie, std::move(rng));
  }
  return nullptr;
}

}  // namespace

Network::Network(engine::Simulator& sim, std::uint64_t master_seed, const TopologySpec& spec)
    : sim_(sim) {
  for (const auto& n : spec.nodes) {
    if (n.empty()) throw ConfigError("empty node label", "nodes");
    if (!by_label_.emplace(n, static_cast<NodeIndex>(labels_.size())).second) {
      throw ConfigError("duplicate node " + n, "nodes");
    }
    labels_.push_back(n);
  }
  sinks_.resize(labels_.size());
  next_port_.assign(labels_.size(), 10000);

  std::set<std::string> used_qdisc_labels;
  for (const auto& l : spec.links) {
    const NodeIndex a = node(l.a);
    const NodeIndex b = node(l.b);
    if (a == b) throw ConfigError("self link on " + l.a, "links");
    if (adjacency_.contains({a, b})) {
      throw ConfigError("duplicate link " + l.a + "-" + l.b, "links");
    }
    if (!(l.rate_ab_bps > 0) || !(l.rate_ba_bps > 0)) {
      throw ConfigError("link " + l.a + "-" + l.b + " needs a positive rate", "links");
    }
    if (l.delay_ab < Time::zero() || l.delay_ba < Time::zero()) {
      throw ConfigError("link " + l.a + "-" + l.b + " has a negative delay", "links");
    }
    auto add = [&](NodeIndex from, NodeIndex to, double rate, Time delay) {
      Interface f;
      f.label = labels_[from] + "->" + labels_[to];
      f.from = from;
      f.to = to;
      f.rate_bps = rate;
      f.delay = delay;
      auto it = spec.interface_qdiscs.find(f.label);
      const QdiscSpec& qs = it != spec.interface_qdiscs.end() ? it->second : spec.default_qdisc;
      f.configured_qdisc = it != spec.interface_qdiscs.end();
      if (f.configured_qdisc) used_qdisc_labels.insert(f.label);
      f.qdisc = make_qdisc(sim_, master_seed, f.label, qs);
      const auto idx = static_cast<InterfaceIndex>(interfaces_.size());
      f.qdisc->set_drop_hook([this](const Packet& p) {
        ++counters_.dropped;
        if (p.key.protocol == qdisc::kProtoUdp) {
          ++counters_.dropped_datagram;
        } else {
          ++counters_.dropped_stream;
        }
      });
      interfaces_.push_back(std::move(f));
      adjacency_[{from, to}] = idx;
    };
    add(a, b, l.rate_ab_bps, l.delay_ab);
    add(b, a, l.rate_ba_bps, l.delay_ba);
  }
  for (const auto& [lbl, qs] : spec.interface_qdiscs) {
    if (!used_qdisc_labels.contains(lbl)) {
      throw ConfigError("no interface " + lbl, "qdisc.interfaces");
    }
  }

  for (const auto& r : spec.routes) {
    if (r.hops.size() < 2) throw ConfigError("route " + r.name + " needs two hops", "routes");
    std::vector<NodeIndex> hops;
    for (const auto& h : r.hops) hops.push_back(node(h));
    if (named_routes_.contains(r.name)) {
      throw ConfigError("duplicate route " + r.name, "routes");
    }
    named_routes_.emplace(r.name, add_route(std::move(hops)));
  }
}

NodeIndex Network::node(std::string_view label) const {
  auto it = by_label_.find(std::string(label));
  if (it == by_label_.end()) throw ConfigError("unknown node " + std::string(label));
  return it->second;
}

std::optional<InterfaceIndex> Network::find_interface(std::string_view label) const {
  for (InterfaceIndex i = 0; i < interfaces_.size(); ++i) {
    if (interfaces_[i].label == label) return i;
  }
  return std::nullopt;
}

std::vector<InterfaceIndex> Network::configured_interfaces() const {
  std::vector<InterfaceIndex> out;
  for (InterfaceIndex i = 0; i < interfaces_.size(); ++i) {
    if (interfaces_[i].configured_qdisc) out.push_back(i);
  }
  std::sort(out.begin(), out.end(), [this](InterfaceIndex x, InterfaceIndex y) {
    return interfaces_[x].label < interfaces_[y].label;
  });
  return out;
}

RouteId Network::add_route(std::vector<NodeIndex> nodes) {
  Route r;
  r.src = nodes.front();
  r.dst = nodes.back();
  for (std::size_t i = 0; i + 1 < nodes.size(); ++i) {
    auto it = adjacency_.find({nodes[i], nodes[i + 1]});
    if (it == adjacency_.end()) {
      throw ConfigError("no link between " + labels_[nodes[i]] + " and " + labels_[nodes[i + 1]],
                        "routes");
    }
    r.interfaces.push_back(it->second);
  }
  r.nodes = std::move(nodes);
  routes_.push_back(std::move(r));
  return static_cast<RouteId>(routes_.size() - 1);
}

RouteId Network::route_between(NodeIndex src, NodeIndex dst) {
  if (auto it = shortest_.find({src, dst}); it != shortest_.end()) return it->second;
  if (src == dst) throw ConfigError("route from " + labels_[src] + " to itself");
  // BFS; neighbours visited in node-index order for a deterministic tie-break.
  std::vector<std::vector<NodeIndex>> nbrs(labels_.size());
  for (const auto& [ab, _] : adjacency_) nbrs[ab.first].push_back(ab.second);
  std::vector<int> prev(labels_.size(), -1);
  std::deque<NodeIndex> frontier{src};
  prev[src] = static_cast<int>(src);
  while (!frontier.empty() && prev[dst] < 0) {
    NodeIndex n = frontier.front();
    frontier.pop_front();
    for (NodeIndex m : nbrs[n]) {
      if (prev[m] < 0) {
        prev[m] = static_cast<int>(n);
        frontier.push_back(m);
      }
    }
  }
  if (prev[dst] < 0) {
    throw ConfigError("no path from " + labels_[src] + " to " + labels_[dst]);
  }
  std::vector<NodeIndex> path{dst};
  while (path.back() != src) path.push_back(static_cast<NodeIndex>(prev[path.back()]));
  std::reverse(path.begin(), path.end());
  const RouteId id = add_route(std::move(path));
  shortest_[{src, dst}] = id;
  return id;
}

RouteId Network::named_route(std::string_view name) const {
  auto it = named_routes_.find(name);
  if (it == named_routes_.end()) throw ConfigError("unknown route " + std::string(name));
  return it->second;
}

RouteId Network::reverse(RouteId r) {
  if (auto it = reversed_.find(r); it != reversed_.end()) return it->second;
  std::vector<NodeIndex> nodes(routes_[r].nodes.rbegin(), routes_[r].nodes.rend());
  const RouteId id = add_route(std::move(nodes));
  reversed_[r] = id;
  reversed_[id] = r;
  return id;
}

void Network::bind(NodeIndex node, const FlowKey& key, Sink sink) {
  sinks_[node][key] = std::make_shared<Sink>(std::move(sink));
}

void Network::unbind(NodeIndex node, const FlowKey& key) { sinks_[node].erase(key); }

std::uint16_t Network::allocate_port(NodeIndex node) {
  std::uint16_t p = next_port_[node];
  next_port_[node] = p == 65535 ? 10000 : static_cast<std::uint16_t>(p + 1);
  return p;
}

void Network::send(Packet pkt) {
  if (pkt.uid == 0) pkt.uid = next_uid();
  pkt.created = sim_.now();
  pkt.hop = 0;
  ++counters_.injected;
  enqueue(routes_[pkt.route].interfaces.front(), std::move(pkt));
}

void Network::enqueue(InterfaceIndex iface, Packet pkt) {
  Interface& f = interfaces_[iface];
  f.qdisc->enqueue(std::move(pkt));
  if (f.kick_pending) return;
  if (sim_.now() >= f.busy_until) {
    start_transmission(iface);
  } else {
    schedule_kick(iface);
  }
}

void Network::schedule_kick(InterfaceIndex iface) {
  Interface& f = interfaces_[iface];
  f.kick_pending = true;
  sim_.schedule_at(f.busy_until, [this, iface] {
    interfaces_[iface].kick_pending = false;
    start_transmission(iface);
  });
}

void Network::start_transmission(InterfaceIndex iface) {
  Interface& f = interfaces_[iface];
  auto pkt = f.qdisc->dequeue();
  if (!pkt) return;
  launch(iface, std::move(*pkt));
}

// No completion event unless something is waiting; enqueue() arms one
// when a packet shows up mid-transmission.
void Network::launch(InterfaceIndex iface, Packet pkt) {
  Interface& f = interfaces_[iface];
  ++f.tx_packets;
  f.tx_bytes += pkt.size;
  if (tx_observer_) tx_observer_(iface, pkt);
  const Time tx = engine::transmission_time(pkt.size, f.rate_bps);
  f.busy_until = sim_.now() + tx;
  f.wire.push_back(std::move(pkt));
  sim_.schedule(tx + f.delay, [this, iface] {
    Packet p = std::move(interfaces_[iface].wire.front());
    interfaces_[iface].wire.pop_front();
    arrive(iface, std::move(p));
  });
  if (f.qdisc->backlog() > 0) schedule_kick(iface);
}

Time Network::transmit(InterfaceIndex iface, Packet pkt) {
  Interface& f = interfaces_[iface];
  if (f.kick_pending || sim_.now() < f.busy_until) throw std::logic_error("transmit: interface " + f.label + " is busy");
  if (pkt.uid == 0) pkt.uid = next_uid();
  const Time arrival = sim_.now() + engine::transmission_time(pkt.size, f.rate_bps) + f.delay;
  ++counters_.injected;
  launch(iface, std::move(pkt));
  return arrival;
}

void Network::arrive(InterfaceIndex via, Packet pkt) {
  const NodeIndex at = interfaces_[via].to;
  const Route& r = routes_[pkt.route];
  ++pkt.hop;
  if (pkt.hop < r.interfaces.size() && r.nodes[pkt.hop] == at) {
    enqueue(r.interfaces[pkt.hop], std::move(pkt));
    return;
  }
  auto& table = sinks_[at];
  auto it = table.find(pkt.key);
  if (it == table.end()) {
    ++counters_.unclaimed;
    return;
  }
  ++counters_.delivered;
  // The sink may unbind itself; keep the handler alive for the call.
  auto sink = it->second;
  (*sink)(std::move(pkt));
}

}  // namespace aqmsim::topology
