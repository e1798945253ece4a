#include "aqmsim/engine/simulator.hpp"

#include <algorithm>
#include <stdexcept>

namespace aqmsim::engine {

EventId Simulator::schedule(Time delay, Action action) {
  if (delay < Time::zero()) {
    throw std::invalid_argument("schedule: negative delay");
  }
  return schedule_at(now_ + delay, std::move(action));
}

EventId Simulator::schedule_at(Time when, Action action) {
  if (finished_) {
    throw std::logic_error("schedule: simulation already finished");
  }
  if (when < now_) {
    throw std::invalid_argument("schedule_at: time in the past");
  }
  std::uint32_t slot;
  if (free_.empty()) {
    slot = static_cast<std::uint32_t>(slots_.size());
    slots_.emplace_back();
  } else {
    slot = free_.back();
    free_.pop_back();
  }
  Slot& s = slots_[slot];
  s.action = std::move(action);
  s.live = true;
  heap_push(Entry{when, next_seq_++, slot, s.gen});
  ++pending_;
  ++scheduled_;
  return (static_cast<EventId>(s.gen) << 32) | slot;
}

bool Simulator::is_pending(EventId id) const {
  const auto slot = static_cast<std::uint32_t>(id);
  const auto gen = static_cast<std::uint32_t>(id >> 32);
  return slot < slots_.size() && slots_[slot].live && slots_[slot].gen == gen;
}

void Simulator::heap_push(Entry e) {
  std::size_t i = heap_.size();
  heap_.push_back(e);
  while (i > 0) {
    const std::size_t parent = (i - 1) / 4;
    if (!e.before(heap_[parent])) break;
    heap_[i] = heap_[parent];
    i = parent;
  }
  heap_[i] = e;
}

void Simulator::heap_pop() {
  const Entry last = heap_.back();
  heap_.pop_back();
  const std::size_t n = heap_.size();
  if (n == 0) return;
  std::size_t i = 0;
  for (;;) {
    const std::size_t first = 4 * i + 1;
    if (first >= n) break;
    std::size_t best = first;
    const std::size_t end = std::min(first + 4, n);
    for (std::size_t c = first + 1; c < end; ++c) {
      if (heap_[c].before(heap_[best])) best = c;
    }
    if (!heap_[best].before(last)) break;
    heap_[i] = heap_[best];
    i = best;
  }
  heap_[i] = last;
}

void Simulator::release(std::uint32_t slot) {
  Slot& s = slots_[slot];
  s.live = false;
  s.action = nullptr;
  if (++s.gen == 0) s.gen = 1;
  free_.push_back(slot);
  --pending_;
}

bool Simulator::cancel(EventId id) {
  if (!is_pending(id)) {
    return false;
  }
  release(static_cast<std::uint32_t>(id));
  ++cancelled_;
  return true;
}

Time Simulator::run_until(Time t_end) {
  if (t_end < now_) {
    throw std::invalid_argument("run_until: end time precedes the clock");
  }
  while (!heap_.empty() && heap_.front().when <= t_end) {
    const Entry top = heap_.front();
    heap_pop();
    Slot& s = slots_[top.slot];
    if (!s.live || s.gen != top.gen) {
      continue;  // cancelled
    }
    Action action = std::move(s.action);
    release(top.slot);
    now_ = top.when;
    ++executed_;
    action();
  }
  now_ = t_end;
  return now_;
}

}  // namespace aqmsim::engine
