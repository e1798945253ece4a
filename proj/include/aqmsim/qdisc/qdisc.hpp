#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string_view>

#include "aqmsim/qdisc/packet.hpp"

namespace aqmsim::qdisc {

enum class Verdict { Enqueue, Drop };

struct QdiscStats {
  /// PIE: the latest queue-delay sample.  FQ-PIE: mean over active buckets.
  double avg_qdelay_s = 0.0;
  /// PIE: drop probability.  FQ-PIE: mean over active buckets.
  double drop_prob = 0.0;
  /// Packets offered to enqueue(), including those dropped on arrival.
  std::uint64_t enqueued = 0;
  std::uint64_t dequeued = 0;
  std::uint64_t dropped = 0;
  std::uint64_t enqueued_bytes = 0;
  std::uint64_t dequeued_bytes = 0;
  std::uint64_t dropped_bytes = 0;
  std::uint64_t backlog_packets = 0;
  std::uint64_t backlog_bytes = 0;

  std::uint64_t early_drops = 0;     // random drops by the AQM
  std::uint64_t forced_drops = 0;    // tail drops at the queue limit
  std::uint64_t overflow_drops = 0;  // FQ-PIE drops from the longest bucket
  std::uint32_t active_queues = 0;

  /// enqueued == dequeued + dropped + backlog, for packets and bytes.
  bool conserved() const {
    return enqueued == dequeued + dropped + backlog_packets &&
           enqueued_bytes == dequeued_bytes + dropped_bytes + backlog_bytes;
  }
};

/// Egress queue discipline.  The owner pulls with dequeue() whenever its
/// transmitter goes idle.
class Qdisc {
 public:
  using DropHook = std::function<void(const Packet&)>;

  virtual ~Qdisc() = default;

  virtual Verdict enqueue(Packet pkt) = 0;
  virtual std::optional<Packet> dequeue() = 0;
  virtual QdiscStats stats() const = 0;
  virtual std::size_t backlog() const = 0;
  virtual std::string_view kind() const = 0;

  /// Called for every packet the qdisc discards, arriving or queued.
  void set_drop_hook(DropHook hook) { drop_hook_ = std::move(hook); }

 protected:
  void notify_drop(const Packet& p) const {
    if (drop_hook_) drop_hook_(p);
  }

 private:
  DropHook drop_hook_;
};

}  // namespace aqmsim::qdisc
