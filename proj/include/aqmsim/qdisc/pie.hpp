#pragma once

#include <cstdint>
#include <deque>

#include "aqmsim/engine/rng.hpp"
#include "aqmsim/engine/simulator.hpp"
#include "aqmsim/qdisc/qdisc.hpp"

namespace aqmsim::qdisc {

/// PIE controller configuration.  Defaults follow RFC 8033 / Linux sch_pie.
struct PieParams {
  double target_s = 0.015;
  double t_update_s = 0.015;
  double alpha = 0.125;  // 1/s
  double beta = 1.25;    // 1/s
  double max_burst_s = 0.150;
  std::uint32_t limit_packets = 1000;
};

/// Controller state of one PIE instance.
struct PieState {
  double drop_prob = 0.0;
  double qdelay_s = 0.0;
  double qdelay_old_s = 0.0;
  double burst_allowance_s = 0.0;
};

inline PieState initial_pie_state(const PieParams& params) {
  return PieState{0.0, 0.0, 0.0, params.max_burst_s};
}

/// The drop-probability increment before clamping:
/// alpha*(qdelay - target) + beta*(qdelay - qdelay_old), scaled down when the
/// current probability is small so that the controller is gentle near zero.
double pie_increment(const PieState& s, const PieParams& params);

/// One periodic controller step.  Pure function of its inputs.
PieState pie_update(PieState s, const PieParams& params);

/// True when a safeguard exempts the arriving packet from random drop.
bool pie_pass_through(const PieState& s, const PieParams& params, std::size_t queued_packets);

/// Random-drop decision for an arriving packet, ignoring the queue limit.
/// Draws from `rng` only if no safeguard applies and drop_prob > 0.
bool pie_early_drop(const PieState& s, const PieParams& params, std::size_t queued_packets,
                    engine::RngStream& rng);

/// Single-queue PIE with departure-timestamp delay measurement and drop-only
/// behaviour.
class PieQueue final : public Qdisc {
 public:
  PieQueue(engine::Simulator& sim, PieParams params, engine::RngStream rng);
  ~PieQueue() override;

  Verdict enqueue(Packet pkt) override;
  std::optional<Packet> dequeue() override;
  QdiscStats stats() const override;
  std::size_t backlog() const override { return queue_.size(); }
  std::string_view kind() const override { return "pie"; }

  const PieState& state() const { return state_; }
  const PieParams& params() const { return params_; }

 private:
  void on_tick();

  engine::Simulator& sim_;
  PieParams params_;
  engine::RngStream rng_;
  PieState state_;
  std::deque<Packet> queue_;
  QdiscStats stats_;
  engine::EventId timer_ = 0;
};

}  // namespace aqmsim::qdisc
