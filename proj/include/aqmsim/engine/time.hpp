#pragma once

#include <cmath>
#include <compare>
#include <cstdint>
#include <limits>

namespace aqmsim::engine {

/// Simulated time (or duration) as a signed count of nanoseconds.
///
/// All event ordering happens on the integer representation; seconds only
/// appear at module boundaries (configuration, reports).
class Time {
 public:
  constexpr Time() = default;

  static constexpr Time nanos(std::int64_t ns) { return Time(ns); }
  static constexpr Time micros(std::int64_t us) { return Time(us * 1'000); }
  static constexpr Time millis(std::int64_t ms) { return Time(ms * 1'000'000); }
  static Time seconds(double s) { return Time(static_cast<std::int64_t>(std::llround(s * 1e9))); }
  static constexpr Time zero() { return Time(0); }
  static constexpr Time max() { return Time(std::numeric_limits<std::int64_t>::max()); }

  constexpr std::int64_t ns() const { return ns_; }
  constexpr double to_seconds() const { return static_cast<double>(ns_) * 1e-9; }
  constexpr double to_millis() const { return static_cast<double>(ns_) * 1e-6; }

  constexpr auto operator<=>(const Time&) const = default;

  constexpr Time operator+(Time o) const { return Time(ns_ + o.ns_); }
  constexpr Time operator-(Time o) const { return Time(ns_ - o.ns_); }
  constexpr Time& operator+=(Time o) { ns_ += o.ns_; return *this; }
  constexpr Time& operator-=(Time o) { ns_ -= o.ns_; return *this; }
  constexpr Time operator*(std::int64_t k) const { return Time(ns_ * k); }

 private:
  constexpr explicit Time(std::int64_t ns) : ns_(ns) {}
  std::int64_t ns_ = 0;
};

/// Serialization time of `bytes` on a link of `bits_per_second`, rounded to the
/// nearest nanosecond.
inline Time transmission_time(std::uint64_t bytes, double bits_per_second) {
  return Time::nanos(static_cast<std::int64_t>(
      std::llround(static_cast<double>(bytes) * 8.0 * 1e9 / bits_per_second)));
}

}  // namespace aqmsim::engine
