#pragma once

#include <deque>

#include "aqmsim/engine/simulator.hpp"
#include "aqmsim/qdisc/qdisc.hpp"

namespace aqmsim::qdisc {

/// Plain FIFO with a packet limit.
class DropTailQueue final : public Qdisc {
 public:
  DropTailQueue(const engine::Simulator& sim, std::uint32_t limit_packets);

  Verdict enqueue(Packet pkt) override;
  std::optional<Packet> dequeue() override;
  QdiscStats stats() const override;
  std::size_t backlog() const override { return queue_.size(); }
  std::string_view kind() const override { return "droptail"; }

 private:
  const engine::Simulator& sim_;
  std::uint32_t limit_;
  std::deque<Packet> queue_;
  QdiscStats stats_;
  double last_qdelay_s_ = 0.0;
};

}  // namespace aqmsim::qdisc
