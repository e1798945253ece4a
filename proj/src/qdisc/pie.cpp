#include "aqmsim/qdisc/pie.hpp"

#include <algorithm>

namespace aqmsim::qdisc {

double pie_increment(const PieState& s, const PieParams& params) {
  double p = params.alpha * (s.qdelay_s - params.target_s) +
             params.beta * (s.qdelay_s - s.qdelay_old_s);
  // Auto-tuning ladder.
  if (s.drop_prob < 0.000001) {
    p /= 2048;
  } else if (s.drop_prob < 0.00001) {
    p /= 512;
  } else if (s.drop_prob < 0.0001) {
    p /= 128;
  } else if (s.drop_prob < 0.001) {
    p /= 32;
  } else if (s.drop_prob < 0.01) {
    p /= 8;
  } else if (s.drop_prob < 0.1) {
    p /= 2;
  }
  return p;
}

PieState pie_update(PieState s, const PieParams& params) {
  s.drop_prob = std::clamp(s.drop_prob + pie_increment(s, params), 0.0, 1.0);
  if (s.qdelay_s == 0.0 && s.qdelay_old_s == 0.0) {
    s.drop_prob *= 0.98;
  }
  s.qdelay_old_s = s.qdelay_s;
  s.burst_allowance_s = std::max(0.0, s.burst_allowance_s - params.t_update_s);
  return s;
}

bool pie_pass_through(const PieState& s, const PieParams& params, std::size_t queued_packets) {
  return s.burst_allowance_s > 0.0 ||
         (s.qdelay_old_s < params.target_s / 2 && s.drop_prob < 0.2) || queued_packets < 2;
}

bool pie_early_drop(const PieState& s, const PieParams& params, std::size_t queued_packets,
                    engine::RngStream& rng) {
  if (pie_pass_through(s, params, queued_packets) || s.drop_prob <= 0.0) {
    return false;
  }
  return rng.uniform() < s.drop_prob;
}

PieQueue::PieQueue(engine::Simulator& sim, PieParams params, engine::RngStream rng)
    : sim_(sim), params_(params), rng_(std::move(rng)), state_(initial_pie_state(params)) {
  timer_ = sim_.schedule(engine::Time::seconds(params_.t_update_s), [this] { on_tick(); });
}

PieQueue::~PieQueue() { sim_.cancel(timer_); }

void PieQueue::on_tick() {
  if (queue_.empty()) {
    state_.qdelay_s = 0.0;
  }
  state_ = pie_update(state_, params_);
  timer_ = sim_.schedule(engine::Time::seconds(params_.t_update_s), [this] { on_tick(); });
}

Verdict PieQueue::enqueue(Packet pkt) {
  ++stats_.enqueued;
  stats_.enqueued_bytes += pkt.size;
  bool drop = false;
  if (queue_.size() >= params_.limit_packets) {
    drop = true;
    ++stats_.forced_drops;
  } else if (pie_early_drop(state_, params_, queue_.size(), rng_)) {
    drop = true;
    ++stats_.early_drops;
  }
  if (drop) {
    ++stats_.dropped;
    stats_.dropped_bytes += pkt.size;
    notify_drop(pkt);
    return Verdict::Drop;
  }
  pkt.enqueued = sim_.now();
  stats_.backlog_bytes += pkt.size;
  queue_.push_back(std::move(pkt));
  return Verdict::Enqueue;
}

std::optional<Packet> PieQueue::dequeue() {
  if (queue_.empty()) return std::nullopt;
  Packet p = std::move(queue_.front());
  queue_.pop_front();
  stats_.backlog_bytes -= p.size;
  ++stats_.dequeued;
  stats_.dequeued_bytes += p.size;
  state_.qdelay_s = (sim_.now() - p.enqueued).to_seconds();
  return p;
}

QdiscStats PieQueue::stats() const {
  QdiscStats s = stats_;
  s.backlog_packets = queue_.size();
  s.avg_qdelay_s = state_.qdelay_s;
  s.drop_prob = state_.drop_prob;
  s.active_queues = queue_.empty() ? 0 : 1;
  return s;
}

}  // namespace aqmsim::qdisc
