#include "aqmsim/apps/traffic.hpp"

#include <cmath>
#include <stdexcept>

namespace aqmsim::apps {

using transport::Connection;
using transport::Side;

FtpSource::FtpSource(Network& net, NodeIndex sender, NodeIndex receiver, Time start) {
  const RouteId r = net.route_between(sender, receiver);
  conn_ = std::make_unique<Connection>(net, sender, receiver, net.allocate_port(receiver),
                                       std::vector<RouteId>{r});
  conn_->set_greedy(Side::Client, true);
  start_event_ = net.sim().schedule_at(start, [this] { conn_->open(); });
}

VoipGenerator::VoipGenerator(Network& net, NodeIndex a, NodeIndex b, VoipConfig config,
                             Time start, Time stop, engine::RngStream rng)
    : net_(net), a_(a), b_(b), config_(config), stop_(stop), rng_(std::move(rng)) {
  if (!(config_.calls_per_second > 0) || !(config_.call_duration_s > 0) ||
      !(config_.packet_interval_s > 0)) {
    throw std::invalid_argument("voip rates must be positive");
  }
  route_ab_ = net_.route_between(a, b);
  route_ba_ = net_.route_between(b, a);
  spawn_armed_ = true;
  spawn_event_ = net_.sim().schedule_at(start, [this] { start_call(); });
}

VoipGenerator::~VoipGenerator() {
  auto& sim = net_.sim();
  if (spawn_armed_) sim.cancel(spawn_event_);
  for (auto& c : calls_) {
    if (c.active) sim.cancel(c.timer);
  }
}

void VoipGenerator::start_call() {
  auto& sim = net_.sim();
  spawn_armed_ = false;
  const Time now = sim.now();
  if (now >= stop_) return;

  const qdisc::FlowKey key{net_.address(a_), net_.address(b_), net_.allocate_port(a_),
                           net_.allocate_port(b_), qdisc::kProtoUdp};
  Call& c = calls_.emplace_back();
  c.ab = std::make_unique<transport::DatagramSocket>(net_, key, route_ab_);
  c.ba = std::make_unique<transport::DatagramSocket>(net_, key.reversed(), route_ba_);
  c.at_b = std::make_unique<transport::DatagramReceiver>(net_, b_, key);
  c.at_a = std::make_unique<transport::DatagramReceiver>(net_, a_, key.reversed());
  const Time phase = Time::seconds(rng_.uniform() * config_.packet_interval_s);
  c.end = now + phase + Time::seconds(config_.call_duration_s);
  c.active = true;
  c.timer = sim.schedule(phase, [this, &c] { tick(c); });

  spawn_armed_ = true;
  spawn_event_ = sim.schedule(Time::seconds(1.0 / config_.calls_per_second),
                              [this] { start_call(); });
}

void VoipGenerator::tick(Call& c) {
  auto& sim = net_.sim();
  if (sim.now() >= c.end || sim.now() >= stop_) {
    c.active = false;
    return;
  }
  c.ab->send(config_.packet_bytes);
  c.ba->send(config_.packet_bytes);
  c.timer = sim.schedule(Time::seconds(config_.packet_interval_s), [this, &c] { tick(c); });
}

std::uint64_t VoipGenerator::active_calls() const {
  std::uint64_t n = 0;
  for (const auto& c : calls_) n += c.active ? 1 : 0;
  return n;
}

std::uint64_t VoipGenerator::packets_sent() const {
  std::uint64_t n = 0;
  for (const auto& c : calls_) n += c.ab->sent_packets() + c.ba->sent_packets();
  return n;
}

std::uint64_t VoipGenerator::packets_received() const {
  std::uint64_t n = 0;
  for (const auto& c : calls_) n += c.at_a->received_packets() + c.at_b->received_packets();
  return n;
}

double VoipGenerator::mean_delay_s() const {
  double sum = 0;
  std::uint64_t n = 0;
  for (const auto& c : calls_) {
    sum += c.at_a->total_delay_s() + c.at_b->total_delay_s();
    n += c.at_a->received_packets() + c.at_b->received_packets();
  }
  return n ? sum / static_cast<double>(n) : 0.0;
}

HttpGenerator::HttpGenerator(Network& net, NodeIndex client, NodeIndex server, HttpConfig config,
                             Time start)
    : net_(net),
      client_(client),
      server_(server),
      config_(config),
      stop_(start + Time::seconds(config.duration_s)) {
  if (!(config_.requests_per_second > 0) || config_.duration_s < 0) {
    throw std::invalid_argument("http rate must be positive");
  }
  route_ = net_.route_between(client, server);
  spawn_armed_ = true;
  spawn_event_ = net_.sim().schedule_at(start, [this] { issue(); });
}

HttpGenerator::~HttpGenerator() {
  if (spawn_armed_) net_.sim().cancel(spawn_event_);
}

void HttpGenerator::issue() {
  auto& sim = net_.sim();
  spawn_armed_ = false;
  if (sim.now() >= stop_) return;
  const std::uint64_t id = issued_++;
  auto conn = std::make_unique<Connection>(net_, client_, server_, config_.server_port,
                                           std::vector<RouteId>{route_});
  Connection& c = *conn;
  live_.emplace(id, std::move(conn));
  c.on_abort([this, id](const std::string&) {
    ++aborted_;
    retire(id);
  });
  c.open();
  c.request(Side::Client, config_.request_bytes, config_.response_bytes, [this, id](Time elapsed) {
    ++completed_;
    completion_sum_s_ += elapsed.to_seconds();
    retire(id);
  });

  spawn_armed_ = true;
  spawn_event_ = sim.schedule(Time::seconds(1.0 / config_.requests_per_second),
                              [this] { issue(); });
}

void HttpGenerator::retire(std::uint64_t id) {
  // The connection is still on the call stack; drop it from a fresh event.
  net_.sim().schedule(Time::zero(), [this, id] { live_.erase(id); });
}

CbrSource::CbrSource(Network& net, NodeIndex src, NodeIndex dst, double rate_bps,
                     std::uint32_t packet_bytes, Time start)
    : net_(net), packet_bytes_(packet_bytes) {
  if (!(rate_bps > 0)) throw std::invalid_argument("cbr rate must be positive");
  const qdisc::FlowKey key{net.address(src), net.address(dst), net.allocate_port(src),
                           net.allocate_port(dst), qdisc::kProtoUdp};
  socket_ = std::make_unique<transport::DatagramSocket>(net, key, net.route_between(src, dst));
  receiver_ = std::make_unique<transport::DatagramReceiver>(net, dst, key);
  interval_ = Time::seconds(8.0 * packet_bytes / rate_bps);
  timer_ = net.sim().schedule_at(start, [this] { tick(); });
}

CbrSource::~CbrSource() { net_.sim().cancel(timer_); }

void CbrSource::tick() {
  socket_->send(packet_bytes_);
  timer_ = net_.sim().schedule(interval_, [this] { tick(); });
}

}  // namespace aqmsim::apps
