#pragma once

#include <cstdint>
#include <deque>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "aqmsim/engine/rng.hpp"
#include "aqmsim/transport/connection.hpp"
#include "aqmsim/transport/datagram.hpp"

namespace aqmsim::apps {

using engine::Time;
using topology::Network;
using topology::NodeIndex;
using topology::RouteId;

/// Greedy bulk transfer from `sender` to `receiver` on a single-path stream.
class FtpSource {
 public:
  FtpSource(Network& net, NodeIndex sender, NodeIndex receiver, Time start);
  FtpSource(const FtpSource&) = delete;
  FtpSource& operator=(const FtpSource&) = delete;

  transport::Connection& connection() { return *conn_; }
  const transport::Connection& connection() const { return *conn_; }
  std::uint64_t delivered_bytes() const {
    return conn_->delivered_bytes(transport::Side::Server);
  }

 private:
  std::unique_ptr<transport::Connection> conn_;
  engine::EventId start_event_ = 0;
};

struct VoipConfig {
  double calls_per_second = 10.0;
  double call_duration_s = 10.0;
  std::uint32_t packet_bytes = 172;
  double packet_interval_s = 0.020;
};

/// Starts a bidirectional constant-rate datagram call every 1/rate seconds.
/// Each call gets fresh ports at both ends and a random phase within one
/// packet interval.
class VoipGenerator {
 public:
  VoipGenerator(Network& net, NodeIndex a, NodeIndex b, VoipConfig config, Time start, Time stop,
                engine::RngStream rng);
  ~VoipGenerator();
  VoipGenerator(const VoipGenerator&) = delete;
  VoipGenerator& operator=(const VoipGenerator&) = delete;

  std::uint64_t calls_started() const { return calls_.size(); }
  std::uint64_t active_calls() const;
  std::uint64_t packets_sent() const;
  std::uint64_t packets_received() const;
  /// Mean one-way delay over all received packets, seconds.
  double mean_delay_s() const;

 private:
  struct Call {
    std::unique_ptr<transport::DatagramSocket> ab;
    std::unique_ptr<transport::DatagramSocket> ba;
    std::unique_ptr<transport::DatagramReceiver> at_b;
    std::unique_ptr<transport::DatagramReceiver> at_a;
    Time end;
    engine::EventId timer = 0;
    bool active = false;
  };

  void start_call();
  void tick(Call& call);

  Network& net_;
  NodeIndex a_;
  NodeIndex b_;
  VoipConfig config_;
  Time stop_;
  engine::RngStream rng_;
  RouteId route_ab_;
  RouteId route_ba_;
  std::deque<Call> calls_;
  engine::EventId spawn_event_ = 0;
  bool spawn_armed_ = false;
};

struct HttpConfig {
  double requests_per_second = 15.0;
  std::uint64_t request_bytes = 200;
  std::uint64_t response_bytes = 100000;
  double duration_s = 180.0;
  std::uint16_t server_port = 80;
};

/// Issues GET-like exchanges from `client` to `server`, one fresh stream
/// connection per request.
class HttpGenerator {
 public:
  HttpGenerator(Network& net, NodeIndex client, NodeIndex server, HttpConfig config, Time start);
  ~HttpGenerator();
  HttpGenerator(const HttpGenerator&) = delete;
  HttpGenerator& operator=(const HttpGenerator&) = delete;

  std::uint64_t issued() const { return issued_; }
  std::uint64_t completed() const { return completed_; }
  std::uint64_t aborted() const { return aborted_; }
  /// Requests still in progress (reported as incomplete at run end).
  std::uint64_t incomplete() const { return issued_ - completed_ - aborted_; }
  double mean_completion_s() const {
    return completed_ ? completion_sum_s_ / static_cast<double>(completed_) : 0.0;
  }

 private:
  void issue();
  void retire(std::uint64_t id);

  Network& net_;
  NodeIndex client_;
  NodeIndex server_;
  HttpConfig config_;
  Time stop_;
  RouteId route_;
  std::map<std::uint64_t, std::unique_ptr<transport::Connection>> live_;
  std::uint64_t issued_ = 0;
  std::uint64_t completed_ = 0;
  std::uint64_t aborted_ = 0;
  double completion_sum_s_ = 0;
  engine::EventId spawn_event_ = 0;
  bool spawn_armed_ = false;
};

/// Single unresponsive datagram flow at a fixed bit rate.
class CbrSource {
 public:
  CbrSource(Network& net, NodeIndex src, NodeIndex dst, double rate_bps,
            std::uint32_t packet_bytes, Time start);
  ~CbrSource();
  CbrSource(const CbrSource&) = delete;
  CbrSource& operator=(const CbrSource&) = delete;

  std::uint64_t sent_bytes() const { return socket_->sent_bytes(); }
  std::uint64_t received_bytes() const { return receiver_->received_bytes(); }

 private:
  void tick();

  Network& net_;
  std::unique_ptr<transport::DatagramSocket> socket_;
  std::unique_ptr<transport::DatagramReceiver> receiver_;
  Time interval_;
  std::uint32_t packet_bytes_;
  engine::EventId timer_ = 0;
};

}  // namespace aqmsim::apps
