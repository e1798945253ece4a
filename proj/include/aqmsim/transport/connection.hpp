#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "aqmsim/topology/network.hpp"
#include "aqmsim/transport/cubic.hpp"

namespace aqmsim::transport {

using engine::Time;
using topology::Network;
using topology::NodeIndex;
using topology::RouteId;

inline constexpr std::uint32_t kMss = 1448;
inline constexpr std::uint32_t kHeaderBytes = 52;  // IP + TCP with timestamps
inline constexpr std::uint32_t kMtu = 1500;
inline constexpr std::uint32_t kControlBytes = 52;

struct StreamConfig {
  std::uint32_t mss = kMss;
  std::uint32_t initial_cwnd_segments = 10;
  double initial_rto_s = 1.0;
  double min_rto_s = 0.2;
  double max_rto_s = 60.0;
};

enum class Side : std::uint8_t { Client = 0, Server = 1 };
inline Side peer(Side s) { return s == Side::Client ? Side::Server : Side::Client; }

/// Snapshot of one subflow's sender state.
struct SubflowInfo {
  bool established = false;
  double cwnd = 0;
  double ssthresh = 0;
  double srtt = 0;
  double rttvar = 0;
  double rto = 0;
  std::uint64_t flight_bytes = 0;
  std::uint64_t bytes_acked = 0;
  std::uint64_t segments_sent = 0;
  std::uint64_t retransmits = 0;
  std::uint64_t fast_retransmits = 0;
  std::uint64_t timeouts = 0;
};

/// A reliable, congestion-controlled byte stream in both directions between
/// a client node and a server node, carried over one or more subflows.
///
/// Each subflow is pinned to a route and runs its own CUBIC window
/// (uncoupled).  New data goes to the subflow with the smallest smoothed RTT
/// among those with congestion-window space.  A single-subflow connection is
/// an ordinary TCP-like stream.
///
/// Both endpoints live in this object; application messages sent from one side
/// are announced to the other when their last byte is delivered in order.
class Connection {
 public:
  using MessageHandler = std::function<void()>;

  /// `routes` are client->server routes, one per subflow; the server side uses
  /// their reverses.
  Connection(Network& net, NodeIndex client, NodeIndex server, std::uint16_t server_port,
             std::vector<RouteId> routes, StreamConfig config = {});
  ~Connection();
  Connection(const Connection&) = delete;
  Connection& operator=(const Connection&) = delete;

  /// Starts the handshake on every subflow.  Data queued before
  /// establishment is held until the subflow is up.
  void open();

  /// Queues `bytes` (at least 1 is sent) from `from`; `on_delivered` runs when
  /// the peer application has received the last byte.
  void send(Side from, std::uint64_t bytes, MessageHandler on_delivered = {});

  /// Keeps the send buffer of `from` permanently non-empty.
  void set_greedy(Side from, bool greedy);

  /// Request/response exchange measured from the moment the request is handed
  /// to the transport until the last response byte is delivered.
  void request(Side from, std::uint64_t request_bytes, std::uint64_t response_bytes,
               std::function<void(Time elapsed)> on_complete);

  /// Index of the subflow that would carry new data from `side`, or nullopt
  /// when every subflow's window is full.
  std::optional<std::size_t> schedule(Side side) const;

  void on_established(std::function<void()> cb) { on_established_ = std::move(cb); }
  void on_abort(std::function<void(const std::string&)> cb) { on_abort_ = std::move(cb); }

  bool established(Side side) const;
  bool aborted() const { return aborted_; }
  const std::string& abort_reason() const { return abort_reason_; }

  std::size_t subflow_count() const { return subflow_count_; }
  SubflowInfo subflow_info(Side side, std::size_t i) const;
  qdisc::FlowKey subflow_key(Side side, std::size_t i) const;

  /// In-order bytes delivered to the application at `side`.
  std::uint64_t delivered_bytes(Side side) const;
  std::uint64_t written_bytes(Side side) const;
  /// Order-sensitive checksums over the chunks `side` has put on the wire and
  /// over the chunks the peer has delivered from it.  Equal once everything
  /// written has been delivered exactly once, in order.
  std::uint64_t written_checksum(Side side) const;
  std::uint64_t delivered_checksum_from(Side side) const;

  /// Direct access for tests that drive the sender by hand.
  void set_subflow_cwnd(Side side, std::size_t i, double cwnd_bytes);
  void set_subflow_srtt(Side side, std::size_t i, double srtt_s);

 private:
  struct Segment {
    std::uint32_t len = 0;
    std::uint64_t dseq = 0;
    bool lost = false;  // awaiting retransmission, not in flight
    bool sacked = false;
    bool retransmitted = false;
  };

  struct SubflowEnd {
    // Identity.
    NodeIndex local = 0;
    RouteId out_route = 0;
    qdisc::FlowKey out_key;

    // Handshake.
    bool established = false;
    Time syn_sent;
    engine::EventId syn_timer = 0;
    double syn_rto = 1.0;

    // Sender.
    std::uint64_t snd_una = 0;
    std::uint64_t snd_nxt = 0;
    std::map<std::uint64_t, Segment> outstanding;
    std::set<std::uint64_t> lost;
    std::uint64_t flight = 0;
    std::optional<Time> last_send;
    CubicController cc;
    RttEstimator rtt;
    std::uint32_t dupacks = 0;
    bool in_recovery = false;
    std::uint64_t recover = 0;
    std::uint64_t rto_recover = 0;
    std::uint64_t sacked_bytes = 0;
    std::uint64_t loss_scan = 0;  // segments below were already checked for loss
    Time rto_deadline = Time::max();
    engine::EventId rto_timer = 0;
    Time rto_timer_at;
    bool rto_armed = false;
    std::optional<double> srtt_override;

    // Receiver.
    std::uint64_t rcv_nxt = 0;
    struct Held {
      std::uint32_t len;
      std::uint64_t dseq;
      std::uint64_t tag;
    };
    std::map<std::uint64_t, Held> ooo;
    std::map<std::uint64_t, std::uint64_t> ooo_ranges;  // start -> end, merged

    SubflowInfo info;

    SubflowEnd(double mss, double cwnd, const StreamConfig& c)
        : cc(mss, cwnd), rtt(c.initial_rto_s, c.min_rto_s, c.max_rto_s) {}
  };

  struct InboundMessage {
    std::uint64_t end = 0;
    MessageHandler handler;
  };

  struct Endpoint {
    NodeIndex node = 0;
    std::vector<SubflowEnd> subflows;
    // Outbound stream.
    std::uint64_t write_end = 0;  // bytes handed over by the application
    std::uint64_t next_dseq = 0;  // bytes assigned to subflows
    bool greedy = false;
    std::uint64_t write_checksum = 0;
    // Inbound stream.
    std::uint64_t rcv_dnext = 0;
    std::map<std::uint64_t, std::pair<std::uint32_t, std::uint64_t>> dooo;  // dseq -> (len, tag)
    std::deque<InboundMessage> inbound;           // messages the peer sent us
    std::uint64_t read_checksum = 0;
  };

  Endpoint& ep(Side s) { return endpoints_[static_cast<int>(s)]; }
  const Endpoint& ep(Side s) const { return endpoints_[static_cast<int>(s)]; }

  void handle(Side at, std::size_t sf, qdisc::Packet&& pkt);
  void handle_syn(Side at, std::size_t sf, const qdisc::Packet& pkt);
  void handle_synack(Side at, std::size_t sf, const qdisc::Packet& pkt);
  void handle_data(Side at, std::size_t sf, const qdisc::Packet& pkt);
  void handle_ack(Side at, std::size_t sf, const qdisc::Packet& pkt);
  void send_syn(std::size_t sf);
  void send_control(Side from, std::size_t sf, qdisc::PacketKind kind, Time echo);
  void send_ack(Side from, std::size_t sf, Time echo, std::optional<std::uint64_t> recent);
  bool apply_sack(SubflowEnd& s, const qdisc::Packet& pkt);
  bool detect_losses(SubflowEnd& s);
  void mark_lost(SubflowEnd& s, std::uint64_t seq, Segment& seg);
  void retransmit_now(Side from, std::size_t sf, std::uint64_t seq, Segment& seg);
  void transmit_segment(Side from, std::size_t sf, std::uint64_t seq, const Segment& seg);
  void pump(Side from);
  void accept_chunk(Side at, std::uint64_t dseq, std::uint32_t len, std::uint64_t tag);
  void arm_rto(Side s, std::size_t sf);
  void on_rto_timer(Side s, std::size_t sf);
  void abort(const std::string& reason);
  std::uint64_t pending_bytes(const Endpoint& e) const;
  static std::uint64_t chunk_tag(std::uint64_t dseq, std::uint32_t len);
  static std::uint64_t fold(std::uint64_t sum, std::uint64_t tag);
  bool has_space(const SubflowEnd& s, std::uint64_t len) const;
  double effective_srtt(const SubflowEnd& s) const;

  Network& net_;
  StreamConfig config_;
  std::size_t subflow_count_;
  Endpoint endpoints_[2];
  bool aborted_ = false;
  std::string abort_reason_;
  std::function<void()> on_established_;
  std::function<void(const std::string&)> on_abort_;
  bool announced_established_ = false;
};

}  // namespace aqmsim::transport
