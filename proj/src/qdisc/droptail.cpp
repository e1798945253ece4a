#include "aqmsim/qdisc/droptail.hpp"

namespace aqmsim::qdisc {

DropTailQueue::DropTailQueue(const engine::Simulator& sim, std::uint32_t limit_packets)
    : sim_(sim), limit_(limit_packets) {}

Verdict DropTailQueue::enqueue(Packet pkt) {
  ++stats_.enqueued;
  stats_.enqueued_bytes += pkt.size;
  if (queue_.size() >= limit_) {
    ++stats_.dropped;
    ++stats_.forced_drops;
    stats_.dropped_bytes += pkt.size;
    notify_drop(pkt);
    return Verdict::Drop;
  }
  pkt.enqueued = sim_.now();
  stats_.backlog_bytes += pkt.size;
  queue_.push_back(std::move(pkt));
  return Verdict::Enqueue;
}

std::optional<Packet> DropTailQueue::dequeue() {
  if (queue_.empty()) return std::nullopt;
  Packet p = std::move(queue_.front());
  queue_.pop_front();
  stats_.backlog_bytes -= p.size;
  ++stats_.dequeued;
  stats_.dequeued_bytes += p.size;
  last_qdelay_s_ = (sim_.now() - p.enqueued).to_seconds();
  return p;
}

QdiscStats DropTailQueue::stats() const {
  QdiscStats s = stats_;
  s.backlog_packets = queue_.size();
  s.avg_qdelay_s = last_qdelay_s_;
  s.active_queues = queue_.empty() ? 0 : 1;
  return s;
}

}  // namespace aqmsim::qdisc
