#include "aqmsim/transport/connection.hpp"

#include <algorithm>
#include <limits>
#include <stdexcept>

namespace aqmsim::transport {

using qdisc::Packet;
using qdisc::PacketKind;

Connection::Connection(Network& net, NodeIndex client, NodeIndex server,
                       std::uint16_t server_port, std::vector<RouteId> routes, StreamConfig config)
    : net_(net), config_(config), subflow_count_(routes.size()) {
  if (routes.empty()) throw std::invalid_argument("connection needs at least one route");
  ep(Side::Client).node = client;
  ep(Side::Server).node = server;
  const double mss = config_.mss;
  const double cwnd0 = static_cast<double>(config_.initial_cwnd_segments) * mss;
  for (std::size_t i = 0; i < routes.size(); ++i) {
    const auto& r = net_.route(routes[i]);
    if (r.src != client || r.dst != server) {
      throw std::invalid_argument("subflow route does not join client and server");
    }
    SubflowEnd c(mss, cwnd0, config_);
    c.local = client;
    c.out_route = routes[i];
    c.out_key = {net_.address(client), net_.address(server), net_.allocate_port(client),
                 server_port, qdisc::kProtoTcp};
    c.syn_rto = config_.initial_rto_s;
    SubflowEnd s(mss, cwnd0, config_);
    s.local = server;
    s.out_route = net_.reverse(routes[i]);
    s.out_key = c.out_key.reversed();
    net_.bind(client, s.out_key, [this, i](Packet&& p) { handle(Side::Client, i, std::move(p)); });
    net_.bind(server, c.out_key, [this, i](Packet&& p) { handle(Side::Server, i, std::move(p)); });
    ep(Side::Client).subflows.push_back(std::move(c));
    ep(Side::Server).subflows.push_back(std::move(s));
  }
}

Connection::~Connection() {
  auto& sim = net_.sim();
  for (Side side : {Side::Client, Side::Server}) {
    for (auto& s : ep(side).subflows) {
      if (s.syn_timer) sim.cancel(s.syn_timer);
      if (s.rto_armed) sim.cancel(s.rto_timer);
    }
  }
  for (std::size_t i = 0; i < subflow_count_; ++i) {
    net_.unbind(ep(Side::Client).node, ep(Side::Server).subflows[i].out_key);
    net_.unbind(ep(Side::Server).node, ep(Side::Client).subflows[i].out_key);
  }
}

std::uint64_t Connection::chunk_tag(std::uint64_t dseq, std::uint32_t len) {
  std::uint64_t x = dseq * 0x9e3779b97f4a7c15ULL + len;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t Connection::fold(std::uint64_t sum, std::uint64_t tag) {
  return sum * 1099511628211ULL + tag;
}

void Connection::open() {
  for (std::size_t i = 0; i < subflow_count_; ++i) send_syn(i);
}

void Connection::send_syn(std::size_t sf) {
  auto& s = ep(Side::Client).subflows[sf];
  if (s.established || aborted_) return;
  s.syn_sent = net_.sim().now();
  send_control(Side::Client, sf, PacketKind::Syn, Time::zero());
  s.syn_timer = net_.sim().schedule(Time::seconds(s.syn_rto), [this, sf] {
    auto& c = ep(Side::Client).subflows[sf];
    c.syn_timer = 0;
    c.syn_rto = std::min(c.syn_rto * 2, config_.max_rto_s);
    send_syn(sf);
  });
}

void Connection::send_control(Side from, std::size_t sf, PacketKind kind, Time echo) {
  const auto& s = ep(from).subflows[sf];
  Packet p;
  p.key = s.out_key;
  p.size = kControlBytes;
  p.kind = kind;
  p.route = s.out_route;
  p.subflow = static_cast<std::uint16_t>(sf);
  p.ts = net_.sim().now();
  p.ts_echo = echo;
  net_.send(std::move(p));
}

void Connection::send_ack(Side from, std::size_t sf, Time echo,
                          std::optional<std::uint64_t> recent) {
  const auto& s = ep(from).subflows[sf];
  Packet p;
  p.key = s.out_key;
  p.kind = PacketKind::Ack;
  p.route = s.out_route;
  p.subflow = static_cast<std::uint16_t>(sf);
  p.ack = s.rcv_nxt;
  p.ts = net_.sim().now();
  p.ts_echo = echo;
  // The block holding the segment that triggered this ACK goes first, then
  // the highest others.
  std::optional<std::uint64_t> first;
  if (recent && *recent >= s.rcv_nxt) {
    auto it = s.ooo_ranges.upper_bound(*recent);
    if (it != s.ooo_ranges.begin()) {
      --it;
      if (it->second > *recent) {
        p.sack[p.sack_count++] = {it->first, it->second};
        first = it->first;
      }
    }
  }
  for (auto it = s.ooo_ranges.rbegin(); it != s.ooo_ranges.rend() && p.sack_count < p.sack.size();
       ++it) {
    if (first && it->first == *first) continue;
    p.sack[p.sack_count++] = {it->first, it->second};
  }
  p.size = kControlBytes + (p.sack_count ? 4 + 8 * p.sack_count : 0);
  net_.send(std::move(p));
}

void Connection::send(Side from, std::uint64_t bytes, MessageHandler on_delivered) {
  if (aborted_) return;
  Endpoint& e = ep(from);
  e.write_end += std::max<std::uint64_t>(bytes, 1);
  ep(peer(from)).inbound.push_back({e.write_end, std::move(on_delivered)});
  pump(from);
}

void Connection::set_greedy(Side from, bool greedy) {
  ep(from).greedy = greedy;
  pump(from);
}

void Connection::request(Side from, std::uint64_t request_bytes, std::uint64_t response_bytes,
                         std::function<void(Time)> on_complete) {
  const Time start = net_.sim().now();
  send(from, request_bytes, [this, from, response_bytes, start, cb = std::move(on_complete)] {
    send(peer(from), response_bytes, [this, start, cb] { cb(net_.sim().now() - start); });
  });
}

std::uint64_t Connection::pending_bytes(const Endpoint& e) const {
  if (e.greedy) return std::numeric_limits<std::uint64_t>::max();
  return e.write_end - e.next_dseq;
}

bool Connection::has_space(const SubflowEnd& s, std::uint64_t len) const {
  return s.established && static_cast<double>(s.flight + len) <= s.cc.cwnd();
}

double Connection::effective_srtt(const SubflowEnd& s) const {
  if (s.srtt_override) return *s.srtt_override;
  return s.rtt.has_sample() ? s.rtt.srtt() : 0.0;
}

std::optional<std::size_t> Connection::schedule(Side side) const {
  const Endpoint& e = ep(side);
  const std::uint64_t want = std::min<std::uint64_t>(config_.mss, std::max<std::uint64_t>(pending_bytes(e), 1));
  std::optional<std::size_t> best;
  for (std::size_t i = 0; i < e.subflows.size(); ++i) {
    const auto& s = e.subflows[i];
    if (!s.lost.empty() || !has_space(s, want)) continue;
    if (!best || effective_srtt(s) < effective_srtt(e.subflows[*best])) best = i;
  }
  return best;
}

void Connection::transmit_segment(Side from, std::size_t sf, std::uint64_t seq, const Segment& seg) {
  auto& s = ep(from).subflows[sf];
  Packet p;
  p.key = s.out_key;
  p.size = seg.len + kHeaderBytes;
  p.kind = PacketKind::Data;
  p.route = s.out_route;
  p.subflow = static_cast<std::uint16_t>(sf);
  p.seq = seq;
  p.len = seg.len;
  p.dseq = seg.dseq;
  p.ts = net_.sim().now();
  p.tag = chunk_tag(seg.dseq, seg.len);
  s.last_send = p.ts;
  ++s.info.segments_sent;
  net_.send(std::move(p));
}

void Connection::pump(Side from) {
  if (aborted_) return;
  Endpoint& e = ep(from);
  for (std::size_t i = 0; i < e.subflows.size(); ++i) {
    auto& s = e.subflows[i];
    if (!s.established) continue;
    bool sent = false;
    while (!s.lost.empty()) {
      const std::uint64_t seq = *s.lost.begin();
      Segment& seg = s.outstanding.at(seq);
      if (!has_space(s, seg.len)) break;
      s.lost.erase(s.lost.begin());
      seg.lost = false;
      seg.retransmitted = true;
      s.flight += seg.len;
      ++s.info.retransmits;
      transmit_segment(from, i, seq, seg);
      sent = true;
    }
    if (sent && s.rto_deadline == Time::max()) arm_rto(from, i);
    if (s.outstanding.empty() && s.last_send &&
        net_.sim().now() - *s.last_send > Time::seconds(s.rtt.rto())) {
      s.cc.on_idle_restart(static_cast<double>(config_.initial_cwnd_segments) * config_.mss);
      s.last_send.reset();
    }
  }
  while (pending_bytes(e) > 0) {
    const auto idx = schedule(from);
    if (!idx) break;
    auto& s = e.subflows[*idx];
    const auto len = static_cast<std::uint32_t>(std::min<std::uint64_t>(config_.mss, pending_bytes(e)));
    Segment seg{len, e.next_dseq, false};
    e.next_dseq += len;
    e.write_checksum = fold(e.write_checksum, chunk_tag(seg.dseq, len));
    const std::uint64_t seq = s.snd_nxt;
    s.snd_nxt += len;
    s.outstanding.emplace(seq, seg);
    s.flight += len;
    transmit_segment(from, *idx, seq, seg);
    if (s.rto_deadline == Time::max()) arm_rto(from, *idx);
  }
}

void Connection::arm_rto(Side side, std::size_t sf) {
  auto& s = ep(side).subflows[sf];
  auto& sim = net_.sim();
  s.rto_deadline = sim.now() + Time::seconds(s.rtt.rto());
  // A timer already due no later than the deadline re-checks it when it fires.
  if (s.rto_armed && s.rto_timer_at <= s.rto_deadline) return;
  if (s.rto_armed) sim.cancel(s.rto_timer);
  s.rto_armed = true;
  s.rto_timer_at = s.rto_deadline;
  s.rto_timer = sim.schedule_at(s.rto_deadline, [this, side, sf] { on_rto_timer(side, sf); });
}

void Connection::on_rto_timer(Side side, std::size_t sf) {
  auto& s = ep(side).subflows[sf];
  s.rto_armed = false;
  if (aborted_ || s.outstanding.empty() || s.rto_deadline == Time::max()) return;
  auto& sim = net_.sim();
  if (sim.now() < s.rto_deadline) {
    s.rto_armed = true;
    s.rto_timer_at = s.rto_deadline;
    s.rto_timer = sim.schedule_at(s.rto_deadline, [this, side, sf] { on_rto_timer(side, sf); });
    return;
  }
  ++s.info.timeouts;
  s.cc.on_timeout();
  s.rtt.backoff();
  s.in_recovery = false;
  s.dupacks = 0;
  s.rto_recover = s.snd_nxt;
  for (auto& [seq, seg] : s.outstanding) {
    seg.retransmitted = false;
    if (!seg.lost && !seg.sacked) {
      seg.lost = true;
      s.lost.insert(seq);
    }
  }
  s.flight = 0;
  pump(side);
  arm_rto(side, sf);
}

void Connection::handle(Side at, std::size_t sf, Packet&& pkt) {
  if (aborted_) return;
  switch (pkt.kind) {
    case PacketKind::Syn:
      if (at == Side::Server) handle_syn(at, sf, pkt);
      break;
    case PacketKind::SynAck:
      if (at == Side::Client) handle_synack(at, sf, pkt);
      break;
    case PacketKind::Data:
      handle_data(at, sf, pkt);
      break;
    case PacketKind::Ack:
      handle_ack(at, sf, pkt);
      break;
    case PacketKind::Datagram:
      break;
  }
}

void Connection::handle_syn(Side at, std::size_t sf, const Packet& pkt) {
  auto& s = ep(at).subflows[sf];
  send_control(at, sf, PacketKind::SynAck, pkt.ts);
  if (!s.established) {
    s.established = true;
    pump(at);
  }
}

void Connection::handle_synack(Side at, std::size_t sf, const Packet& pkt) {
  auto& s = ep(at).subflows[sf];
  if (s.established) return;
  s.established = true;
  if (s.syn_timer) {
    net_.sim().cancel(s.syn_timer);
    s.syn_timer = 0;
  }
  s.rtt.on_sample((net_.sim().now() - pkt.ts_echo).to_seconds());
  pump(at);
  if (!announced_established_) {
    announced_established_ = true;
    if (on_established_) on_established_();
  }
}

void Connection::handle_data(Side at, std::size_t sf, const Packet& pkt) {
  auto& s = ep(at).subflows[sf];
  std::vector<SubflowEnd::Held> ready;
  if (pkt.seq == s.rcv_nxt) {
    s.rcv_nxt += pkt.len;
    ready.push_back({pkt.len, pkt.dseq, pkt.tag});
    while (!s.ooo.empty() && s.ooo.begin()->first <= s.rcv_nxt) {
      auto node = s.ooo.extract(s.ooo.begin());
      if (node.key() == s.rcv_nxt) {
        s.rcv_nxt += node.mapped().len;
        ready.push_back(node.mapped());
      }
    }
    while (!s.ooo_ranges.empty() && s.ooo_ranges.begin()->second <= s.rcv_nxt) {
      s.ooo_ranges.erase(s.ooo_ranges.begin());
    }
  } else if (pkt.seq > s.rcv_nxt) {
    s.ooo.emplace(pkt.seq, SubflowEnd::Held{pkt.len, pkt.dseq, pkt.tag});
    std::uint64_t a = pkt.seq;
    std::uint64_t b = pkt.seq + pkt.len;
    auto it = s.ooo_ranges.upper_bound(a);
    if (it != s.ooo_ranges.begin()) {
      auto prev = std::prev(it);
      if (prev->second >= a) {
        a = prev->first;
        b = std::max(b, prev->second);
        it = s.ooo_ranges.erase(prev);
      }
    }
    while (it != s.ooo_ranges.end() && it->first <= b) {
      b = std::max(b, it->second);
      it = s.ooo_ranges.erase(it);
    }
    s.ooo_ranges.emplace(a, b);
  }
  send_ack(at, sf, pkt.ts, pkt.seq);
  for (const auto& h : ready) accept_chunk(at, h.dseq, h.len, h.tag);
}

void Connection::accept_chunk(Side at, std::uint64_t dseq, std::uint32_t len, std::uint64_t tag) {
  Endpoint& e = ep(at);
  if (dseq < e.rcv_dnext) return;
  e.dooo.emplace(dseq, std::make_pair(len, tag));
  bool advanced = false;
  while (!e.dooo.empty() && e.dooo.begin()->first == e.rcv_dnext) {
    const auto [l, t] = e.dooo.begin()->second;
    e.read_checksum = fold(e.read_checksum, t);
    e.rcv_dnext += l;
    e.dooo.erase(e.dooo.begin());
    advanced = true;
  }
  if (!advanced) return;
  std::vector<MessageHandler> done;
  while (!e.inbound.empty() && e.inbound.front().end <= e.rcv_dnext) {
    done.push_back(std::move(e.inbound.front().handler));
    e.inbound.pop_front();
  }
  for (auto& h : done) {
    if (aborted_) return;
    if (h) h();
  }
}

void Connection::mark_lost(SubflowEnd& s, std::uint64_t seq, Segment& seg) {
  seg.lost = true;
  s.flight -= seg.len;
  s.lost.insert(seq);
}

void Connection::retransmit_now(Side from, std::size_t sf, std::uint64_t seq, Segment& seg) {
  auto& s = ep(from).subflows[sf];
  if (seg.lost) {
    s.lost.erase(seq);
    seg.lost = false;
    s.flight += seg.len;
  }
  seg.retransmitted = true;
  ++s.info.retransmits;
  transmit_segment(from, sf, seq, seg);
}

bool Connection::apply_sack(SubflowEnd& s, const Packet& pkt) {
  bool any = false;
  for (std::uint8_t i = 0; i < pkt.sack_count; ++i) {
    const auto& b = pkt.sack[i];
    for (auto it = s.outstanding.lower_bound(b.start);
         it != s.outstanding.end() && it->first + it->second.len <= b.end; ++it) {
      auto& seg = it->second;
      if (seg.sacked) continue;
      seg.sacked = true;
      s.sacked_bytes += seg.len;
      any = true;
      if (seg.lost) {
        s.lost.erase(it->first);
        seg.lost = false;
      } else {
        s.flight -= seg.len;
      }
    }
  }
  return any;
}

bool Connection::detect_losses(SubflowEnd& s) {
  // A hole is lost once three segments' worth of data above it was SACKed.
  const std::uint64_t need = 3ULL * config_.mss;
  if (s.sacked_bytes < need) return false;
  std::uint64_t above = 0;
  std::optional<std::uint64_t> limit;
  for (auto it = s.outstanding.rbegin(); it != s.outstanding.rend(); ++it) {
    if (!it->second.sacked) continue;
    above += it->second.len;
    if (above >= need) {
      limit = it->first;
      break;
    }
  }
  if (!limit) return false;
  bool marked = false;
  for (auto it = s.outstanding.lower_bound(std::max(s.loss_scan, s.snd_una));
       it != s.outstanding.end() && it->first < *limit; ++it) {
    auto& seg = it->second;
    if (seg.sacked || seg.lost || seg.retransmitted) continue;
    mark_lost(s, it->first, seg);
    marked = true;
  }
  s.loss_scan = std::max(s.loss_scan, *limit);
  return marked;
}

void Connection::handle_ack(Side at, std::size_t sf, const Packet& pkt) {
  auto& s = ep(at).subflows[sf];
  const Time now = net_.sim().now();
  if (pkt.ack > s.snd_nxt) {
    abort("ACK for unsent data on subflow " + std::to_string(sf));
    return;
  }
  const double flight_before = static_cast<double>(s.flight);
  bool advanced = false;
  if (pkt.ack > s.snd_una) {
    s.rtt.on_sample((now - pkt.ts_echo).to_seconds());
    while (!s.outstanding.empty() && s.outstanding.begin()->first < pkt.ack) {
      const auto& [seq, seg] = *s.outstanding.begin();
      if (seg.lost) {
        s.lost.erase(seq);
      } else if (seg.sacked) {
        s.sacked_bytes -= seg.len;
      } else {
        s.flight -= seg.len;
      }
      s.info.bytes_acked += seg.len;
      s.outstanding.erase(s.outstanding.begin());
    }
    s.snd_una = pkt.ack;
    s.dupacks = 0;
    advanced = true;
  } else if (pkt.ack == s.snd_una && !s.outstanding.empty()) {
    ++s.dupacks;
  }
  const bool new_sack = apply_sack(s, pkt);
  const bool found_loss = (new_sack || advanced) && detect_losses(s);

  if (advanced) {
    if (s.in_recovery) {
      if (s.snd_una >= s.recover) {
        s.in_recovery = false;
      } else if (!s.outstanding.empty()) {
        // Partial ACK: the new head is missing as well.
        auto& [seq, seg] = *s.outstanding.begin();
        if (!seg.sacked && !seg.lost && !seg.retransmitted) mark_lost(s, seq, seg);
      }
    } else {
      // Growth only while the window is what limits sending.
      const bool cwnd_limited = s.cc.in_slow_start() ? s.cc.cwnd() < 2.0 * flight_before
                                                     : flight_before + config_.mss >= s.cc.cwnd();
      if (cwnd_limited) s.cc.on_ack(now);
    }
    if (s.outstanding.empty()) {
      s.rto_deadline = Time::max();
    } else {
      arm_rto(at, sf);
    }
  }

  if (!s.in_recovery && !s.outstanding.empty() && s.snd_una >= s.rto_recover &&
      (found_loss || s.dupacks >= 3)) {
    s.cc.on_fast_retransmit(now);
    s.in_recovery = true;
    s.recover = s.snd_nxt;
    ++s.info.fast_retransmits;
    auto& [seq, seg] = *s.outstanding.begin();
    if (!seg.sacked && !seg.retransmitted) retransmit_now(at, sf, seq, seg);
  }
  pump(at);
}

void Connection::abort(const std::string& reason) {
  if (aborted_) return;
  aborted_ = true;
  abort_reason_ = reason;
  auto& sim = net_.sim();
  for (Side side : {Side::Client, Side::Server}) {
    for (auto& s : ep(side).subflows) {
      if (s.syn_timer) sim.cancel(s.syn_timer);
      s.syn_timer = 0;
      if (s.rto_armed) sim.cancel(s.rto_timer);
      s.rto_armed = false;
    }
  }
  if (on_abort_) on_abort_(reason);
}

bool Connection::established(Side side) const {
  for (const auto& s : ep(side).subflows) {
    if (s.established) return true;
  }
  return false;
}

SubflowInfo Connection::subflow_info(Side side, std::size_t i) const {
  const auto& s = ep(side).subflows.at(i);
  SubflowInfo info = s.info;
  info.established = s.established;
  info.cwnd = s.cc.cwnd();
  info.ssthresh = s.cc.ssthresh();
  info.srtt = effective_srtt(s);
  info.rttvar = s.rtt.rttvar();
  info.rto = s.rtt.rto();
  info.flight_bytes = s.flight;
  return info;
}

qdisc::FlowKey Connection::subflow_key(Side side, std::size_t i) const {
  return ep(side).subflows.at(i).out_key;
}

std::uint64_t Connection::delivered_bytes(Side side) const { return ep(side).rcv_dnext; }
std::uint64_t Connection::written_bytes(Side side) const { return ep(side).write_end; }
std::uint64_t Connection::written_checksum(Side side) const { return ep(side).write_checksum; }
std::uint64_t Connection::delivered_checksum_from(Side side) const {
  return ep(peer(side)).read_checksum;
}

void Connection::set_subflow_cwnd(Side side, std::size_t i, double cwnd_bytes) {
  ep(side).subflows.at(i).cc.set_cwnd(cwnd_bytes);
}

void Connection::set_subflow_srtt(Side side, std::size_t i, double srtt_s) {
  ep(side).subflows.at(i).srtt_override = srtt_s;
}

}  // namespace aqmsim::transport
