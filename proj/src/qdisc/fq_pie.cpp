#include "aqmsim/qdisc/fq_pie.hpp"

#include <algorithm>
#include <stdexcept>

#include "aqmsim/qdisc/lookup3.hpp"

namespace aqmsim::qdisc {

std::uint32_t classify_flow(const FlowKey& key, std::uint32_t salt, std::uint32_t num_buckets) {
  if (num_buckets == 0 || (num_buckets & (num_buckets - 1)) != 0) {
    throw std::invalid_argument("classify_flow: num_buckets must be a power of two");
  }
  const auto bytes = key.bytes();
  return hashlittle(bytes, salt) & (num_buckets - 1);
}

FqPieQueue::FqPieQueue(engine::Simulator& sim, FqPieParams params, engine::RngStream rng)
    : sim_(sim), params_(params), rng_(std::move(rng)), buckets_(params.num_buckets) {
  if (params_.num_buckets == 0 || (params_.num_buckets & (params_.num_buckets - 1)) != 0) {
    throw std::invalid_argument("fq_pie: num_buckets must be a power of two");
  }
  timer_ = sim_.schedule(engine::Time::seconds(params_.pie.t_update_s), [this] { on_tick(); });
}

FqPieQueue::~FqPieQueue() { sim_.cancel(timer_); }

FqPieQueue::Bucket& FqPieQueue::touch(std::uint32_t idx) {
  Bucket& b = buckets_[idx];
  if (!b.touched) {
    // An untouched bucket has only ever seen idle updates: probability and
    // delays stay 0 while the burst allowance runs down.
    b.touched = true;
    b.pie = initial_pie_state(params_.pie);
    for (std::uint64_t i = 0; i < ticks_ && b.pie.burst_allowance_s > 0.0; ++i) {
      b.pie.burst_allowance_s = std::max(0.0, b.pie.burst_allowance_s - params_.pie.t_update_s);
    }
  }
  return b;
}

void FqPieQueue::track(std::uint32_t idx) {
  Bucket& b = buckets_[idx];
  if (!b.tracked) {
    b.tracked = true;
    tracked_.push_back(idx);
  }
}

void FqPieQueue::on_tick() {
  ++ticks_;
  std::size_t keep = 0;
  for (std::uint32_t idx : tracked_) {
    Bucket& b = buckets_[idx];
    if (b.queue.empty()) {
      b.pie.qdelay_s = 0.0;
    }
    b.pie = pie_update(b.pie, params_.pie);
    const bool at_rest = b.queue.empty() && b.pie.drop_prob == 0.0 && b.pie.qdelay_s == 0.0 &&
                         b.pie.qdelay_old_s == 0.0 && b.pie.burst_allowance_s == 0.0;
    if (at_rest) {
      b.tracked = false;
    } else {
      tracked_[keep++] = idx;
    }
  }
  tracked_.resize(keep);
  timer_ = sim_.schedule(engine::Time::seconds(params_.pie.t_update_s), [this] { on_tick(); });
}

Verdict FqPieQueue::enqueue(Packet pkt) {
  ++stats_.enqueued;
  stats_.enqueued_bytes += pkt.size;
  const std::uint32_t idx = bucket_of(pkt.key);
  Bucket& b = touch(idx);
  track(idx);

  if (pie_early_drop(b.pie, params_.pie, b.queue.size(), rng_)) {
    ++stats_.dropped;
    ++stats_.early_drops;
    stats_.dropped_bytes += pkt.size;
    notify_drop(pkt);
    return Verdict::Drop;
  }

  const std::uint64_t uid = pkt.uid;
  pkt.enqueued = sim_.now();
  b.bytes += pkt.size;
  total_bytes_ += pkt.size;
  ++total_packets_;
  b.queue.push_back(std::move(pkt));
  if (!b.active) {
    b.active = true;
    b.deficit = 0;
    schedule_.push_back(idx);
  }

  bool arriving_dropped = false;
  while (total_packets_ > params_.limit_packets ||
         (params_.limit_bytes != 0 && total_bytes_ > params_.limit_bytes)) {
    // Overflow: the head of the fattest bucket goes, not the arrival.
    auto longest = std::max_element(
        schedule_.begin(), schedule_.end(),
        [this](std::uint32_t a, std::uint32_t c) { return buckets_[a].bytes < buckets_[c].bytes; });
    if (longest == schedule_.end()) break;
    Bucket& victim = buckets_[*longest];
    Packet dropped = std::move(victim.queue.front());
    victim.queue.pop_front();
    victim.bytes -= dropped.size;
    total_bytes_ -= dropped.size;
    --total_packets_;
    if (victim.queue.empty()) {
      victim.active = false;
      victim.deficit = 0;
      schedule_.erase(longest);
    }
    ++stats_.dropped;
    ++stats_.overflow_drops;
    stats_.dropped_bytes += dropped.size;
    arriving_dropped = arriving_dropped || dropped.uid == uid;
    notify_drop(dropped);
  }
  return arriving_dropped ? Verdict::Drop : Verdict::Enqueue;
}

std::optional<Packet> FqPieQueue::dequeue() {
  while (!schedule_.empty()) {
    const std::uint32_t idx = schedule_.front();
    Bucket& b = buckets_[idx];
    const Packet& head = b.queue.front();
    if (b.deficit < static_cast<std::int64_t>(head.size)) {
      b.deficit += params_.quantum;
      schedule_.pop_front();
      schedule_.push_back(idx);
      continue;
    }
    Packet p = std::move(b.queue.front());
    b.queue.pop_front();
    b.deficit -= p.size;
    b.bytes -= p.size;
    total_bytes_ -= p.size;
    --total_packets_;
    b.pie.qdelay_s = (sim_.now() - p.enqueued).to_seconds();
    if (b.queue.empty()) {
      schedule_.pop_front();
      b.active = false;
      b.deficit = 0;
    }
    ++stats_.dequeued;
    stats_.dequeued_bytes += p.size;
    return p;
  }
  return std::nullopt;
}

QdiscStats FqPieQueue::stats() const {
  QdiscStats s = stats_;
  s.backlog_packets = total_packets_;
  s.backlog_bytes = total_bytes_;
  s.active_queues = static_cast<std::uint32_t>(schedule_.size());
  if (!schedule_.empty()) {
    double qdelay = 0.0;
    double prob = 0.0;
    for (std::uint32_t idx : schedule_) {
      qdelay += buckets_[idx].pie.qdelay_s;
      prob += buckets_[idx].pie.drop_prob;
    }
    s.avg_qdelay_s = qdelay / static_cast<double>(schedule_.size());
    s.drop_prob = prob / static_cast<double>(schedule_.size());
  }
  return s;
}

std::vector<FqPieQueue::BucketView> FqPieQueue::active_buckets() const {
  std::vector<BucketView> out;
  out.reserve(schedule_.size());
  for (std::uint32_t idx : schedule_) {
    const Bucket& b = buckets_[idx];
    out.push_back({idx, b.queue.size(), b.bytes, b.deficit, b.pie});
  }
  return out;
}

}  // namespace aqmsim::qdisc
