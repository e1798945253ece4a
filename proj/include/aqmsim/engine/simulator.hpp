#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "aqmsim/engine/time.hpp"

namespace aqmsim::engine {

/// Never 0, so 0 can stand for "no event".
using EventId = std::uint64_t;

/// Single-threaded discrete-event scheduler.
///
/// Events fire in (fire_time, sequence_number) order, so simultaneous events
/// run in the order they were scheduled.  A Simulator may be moved between
/// threads but must never be used from two threads at once.
class Simulator {
 public:
  using Action = std::function<void()>;

  Simulator() = default;
  Simulator(const Simulator&) = delete;
  Simulator& operator=(const Simulator&) = delete;

  Time now() const { return now_; }

  /// Registers `action` to fire at now() + delay.  Throws
  /// std::invalid_argument for a negative delay and std::logic_error once the
  /// simulation has been finished.
  EventId schedule(Time delay, Action action);
  EventId schedule_at(Time when, Action action);

  /// Returns true if the event was pending and is now cancelled.
  bool cancel(EventId id);
  bool is_pending(EventId id) const;

  /// Executes every event with fire_time <= t_end, then leaves the clock at
  /// t_end.  Returns the final clock value.
  Time run_until(Time t_end);

  /// Marks the run as over; further schedule() calls are rejected.
  void finish() { finished_ = true; }
  bool finished() const { return finished_; }

  std::uint64_t scheduled_count() const { return scheduled_; }
  std::uint64_t executed_count() const { return executed_; }
  std::uint64_t cancelled_count() const { return cancelled_; }
  std::size_t pending_count() const { return pending_; }

 private:
  struct Entry {
    Time when;
    std::uint64_t seq;
    std::uint32_t slot;
    std::uint32_t gen;
    bool before(const Entry& o) const {
      return when != o.when ? when < o.when : seq < o.seq;
    }
  };
  // Actions live in reusable slots; an id is (generation << 32 | slot) and
  // goes stale when the slot's generation moves on.
  struct Slot {
    Action action;
    std::uint32_t gen = 1;
    bool live = false;
  };

  void release(std::uint32_t slot);
  void heap_push(Entry e);
  void heap_pop();

  Time now_;
  std::uint64_t next_seq_ = 0;
  bool finished_ = false;
  std::vector<Entry> heap_;  // 4-ary min-heap
  std::vector<Slot> slots_;
  std::vector<std::uint32_t> free_;
  std::size_t pending_ = 0;
  std::uint64_t scheduled_ = 0;
  std::uint64_t executed_ = 0;
  std::uint64_t cancelled_ = 0;
};

}  // namespace aqmsim::engine
