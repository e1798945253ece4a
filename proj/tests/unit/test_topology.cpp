#include <string>
#include <vector>

#include "aqmsim/cli/scenario.hpp"
#include "aqmsim/topology/config_error.hpp"
#include "aqmsim/topology/network.hpp"
#include "doctest.h"

using namespace aqmsim;
using namespace aqmsim::topology;
using engine::Simulator;

namespace {

TopologySpec two_nodes(double rate_bps, Time delay) {
  TopologySpec t;
  t.nodes = {"A", "B"};
  t.links.push_back({"A", "B", rate_bps, rate_bps, delay, delay});
  return t;
}

Packet packet_for(Network& net, RouteId r, std::uint32_t size, std::uint16_t port = 9) {
  Packet p;
  p.route = r;
  p.size = size;
  p.key = {net.address(net.route(r).src), net.address(net.route(r).dst), port, port,
           qdisc::kProtoUdp};
  return p;
}

std::string config_error_of(const TopologySpec& spec) {
  Simulator sim;
  try {
    Network net(sim, 1, spec);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST_CASE("minimal two-node network") {
  Simulator sim;
  Network net(sim, 1, two_nodes(10e6, Time::zero()));
  CHECK(net.node_count() == 2);
  CHECK(net.link_count() == 1);
  CHECK(net.interface_count() == 2);
  CHECK(net.find_interface("A->B").has_value());
  CHECK(net.find_interface("B->A").has_value());
  CHECK_FALSE(net.find_interface("A->C").has_value());
}

TEST_CASE("1500 bytes at 12 Mbps arrive after 1 ms") {
  Simulator sim;
  Network net(sim, 1, two_nodes(12e6, Time::zero()));
  const auto a = net.node("A"), b = net.node("B");
  RouteId r = net.route_between(a, b);
  Time arrived = Time::max();
  Packet p = packet_for(net, r, 1500);
  net.bind(b, p.key, [&](Packet&&) { arrived = sim.now(); });
  net.send(p);
  sim.run_until(Time::seconds(1));
  CHECK(arrived == Time::millis(1));
}

TEST_CASE("100 bytes at 10 Mbps with 10 ms delay arrive after 10.08 ms") {
  Simulator sim;
  Network net(sim, 1, two_nodes(10e6, Time::millis(10)));
  RouteId r = net.route_between(net.node("A"), net.node("B"));
  Time arrived = Time::max();
  Packet p = packet_for(net, r, 100);
  net.bind(net.node("B"), p.key, [&](Packet&&) { arrived = sim.now(); });
  CHECK(net.transmit(*net.find_interface("A->B"), p) == Time::micros(10080));
  sim.run_until(Time::seconds(1));
  CHECK(arrived == Time::micros(10080));
}

TEST_CASE("back-to-back packets pipeline at line rate") {
  Simulator sim;
  const double rate = 8e6;
  Network net(sim, 1, two_nodes(rate, Time::zero()));
  RouteId r = net.route_between(net.node("A"), net.node("B"));
  std::vector<Time> arrivals;
  Packet p = packet_for(net, r, 1000);
  net.bind(net.node("B"), p.key, [&](Packet&&) { arrivals.push_back(sim.now()); });
  const int n = 25;
  for (int i = 0; i < n; ++i) net.send(p);
  sim.run_until(Time::seconds(1));
  REQUIRE(arrivals.size() == n);
  CHECK(arrivals.back() == Time::micros(n * 1000));  // n * 1000 B * 8 / 8 Mbps
  CHECK(net.counters().delivered == static_cast<std::uint64_t>(n));
  CHECK(net.counters().in_network() == 0);
}

TEST_CASE("multi-hop forwarding and unclaimed delivery") {
  Simulator sim;
  TopologySpec t;
  t.nodes = {"A", "R", "B"};
  t.links.push_back({"A", "R", 100e6, 100e6, Time::millis(1), Time::millis(1)});
  t.links.push_back({"R", "B", 10e6, 10e6, Time::millis(5), Time::millis(5)});
  t.routes.push_back({"ab", {"A", "R", "B"}});
  Network net(sim, 1, t);
  RouteId r = net.named_route("ab");
  CHECK(net.route(r).interfaces.size() == 2);
  CHECK(net.route(net.reverse(r)).src == net.node("B"));
  Packet p = packet_for(net, r, 1250);
  Time arrived = Time::max();
  net.bind(net.node("B"), p.key, [&](Packet&& q) {
    arrived = sim.now();
    CHECK(q.hop == 2);
  });
  net.send(p);
  net.send(packet_for(net, r, 1250, 77));  // nobody listens
  sim.run_until(Time::seconds(1));
  // 0.1 ms + 1 ms + 1 ms + 5 ms
  CHECK(arrived == Time::micros(7100));
  CHECK(net.counters().unclaimed == 1);
  CHECK_THROWS_AS(net.named_route("nope"), ConfigError);
}

TEST_CASE("qdisc installation") {
  Simulator sim;
  TopologySpec t = two_nodes(10e6, Time::millis(1));
  QdiscSpec pie;
  pie.kind = QdiscKind::Pie;
  t.interface_qdiscs["A->B"] = pie;
  Network net(sim, 1, t);
  CHECK(net.interface(*net.find_interface("A->B")).qdisc->kind() == "pie");
  CHECK(net.interface(*net.find_interface("B->A")).qdisc->kind() == "droptail");
  CHECK(net.configured_interfaces().size() == 1);
  CHECK(parse_qdisc_kind("fq_pie") == QdiscKind::FqPie);
  CHECK_FALSE(parse_qdisc_kind("codel").has_value());
}

TEST_CASE("configuration errors name the offender") {
  TopologySpec t = two_nodes(10e6, Time::zero());
  t.routes.push_back({"bad", {"A", "X9"}});
  CHECK(config_error_of(t).find("unknown node X9") != std::string::npos);

  TopologySpec dup = two_nodes(10e6, Time::zero());
  dup.links.push_back({"B", "A", 1e6, 1e6, Time::zero(), Time::zero()});
  CHECK(config_error_of(dup).find("duplicate link") != std::string::npos);

  TopologySpec dangling = two_nodes(10e6, Time::zero());
  dangling.links.push_back({"A", "Q", 1e6, 1e6, Time::zero(), Time::zero()});
  CHECK(config_error_of(dangling).find("unknown node Q") != std::string::npos);

  TopologySpec zero_rate = two_nodes(0, Time::zero());
  CHECK(config_error_of(zero_rate).find("positive rate") != std::string::npos);

  TopologySpec bad_iface = two_nodes(10e6, Time::zero());
  bad_iface.interface_qdiscs["A->C"] = QdiscSpec{};
  CHECK(config_error_of(bad_iface).find("A->C") != std::string::npos);
}

TEST_CASE("default scenario topology") {
  auto cfg = cli::load_scenario(std::string(AQMSIM_SCENARIO_DIR) + "/paper-default.yaml");
  Simulator sim;
  Network net(sim, cfg.run.seed, cfg.topology);
  CHECK(net.node_count() == 10);
  CHECK(net.link_count() == 10);
  auto configured = net.configured_interfaces();
  REQUIRE(configured.size() == 2);
  std::vector<std::string> labels;
  for (auto i : configured) {
    labels.push_back(net.interface(i).label);
    CHECK(net.interface(i).qdisc->kind() == "fq_pie");
  }
  CHECK(labels == std::vector<std::string>{"R1->R3", "R2->R4"});
  const auto& bottleneck = net.interface(*net.find_interface("R1->R3"));
  CHECK(bottleneck.rate_bps == 10e6);
  CHECK(bottleneck.delay == Time::millis(10));
}
