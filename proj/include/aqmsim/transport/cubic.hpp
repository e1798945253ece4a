#pragma once

#include <optional>

#include "aqmsim/engine/time.hpp"

namespace aqmsim::transport {

inline constexpr double kCubicC = 0.4;     // segments / s^3
inline constexpr double kCubicBeta = 0.7;  // multiplicative decrease

/// Time for the cubic to climb back to w_max after a reduction to
/// beta * w_max: cbrt(w_max * (1 - beta) / C), with w_max in segments.
double cubic_k(double w_max_segments);

/// CUBIC window (bytes) `t` seconds after a loss at window `w_max_bytes`:
/// W(t) = C (t - K)^3 + W_max in segments, floored at two segments.
double cubic_window(double t, double w_max_bytes, double mss);

/// Same curve with an explicit origin and K (used when an epoch starts above
/// the previous maximum, where K = 0).
double cubic_window_from(double t, double origin_bytes, double k, double mss);

/// Smoothed RTT and retransmission timeout (RFC 6298 gains 1/8 and 1/4).
class RttEstimator {
 public:
  RttEstimator(double initial_rto_s, double min_rto_s, double max_rto_s)
      : rto_(initial_rto_s), min_rto_(min_rto_s), max_rto_(max_rto_s) {}

  void on_sample(double rtt_s);
  void backoff();

  bool has_sample() const { return has_sample_; }
  double srtt() const { return srtt_; }
  double rttvar() const { return rttvar_; }
  double rto() const { return rto_; }

 private:
  bool has_sample_ = false;
  double srtt_ = 0.0;
  double rttvar_ = 0.0;
  double rto_;
  double min_rto_;
  double max_rto_;
};

/// Congestion window evolution: slow start, CUBIC growth, multiplicative
/// decrease on triple duplicate ACK and collapse on timeout.  Fast
/// convergence and the TCP-friendly region are not modelled.
class CubicController {
 public:
  CubicController(double mss, double initial_cwnd_bytes);

  /// A cumulative ACK advanced snd_una.
  void on_ack(engine::Time now);
  /// Third duplicate ACK.
  void on_fast_retransmit(engine::Time now);
  void on_timeout();
  /// Sending resumes after an idle period longer than the RTO.
  void on_idle_restart(double restart_cwnd_bytes);

  double cwnd() const { return cwnd_; }
  double ssthresh() const { return ssthresh_; }
  double w_max() const { return w_max_; }
  bool in_slow_start() const { return cwnd_ < ssthresh_; }
  std::optional<engine::Time> epoch_start() const { return epoch_start_; }
  double mss() const { return mss_; }

  void set_cwnd(double bytes) { cwnd_ = bytes; }
  void set_ssthresh(double bytes) { ssthresh_ = bytes; }

 private:
  double mss_;
  double cwnd_;
  double ssthresh_;
  double w_max_ = 0.0;
  double origin_ = 0.0;
  double k_ = 0.0;
  std::optional<engine::Time> epoch_start_;
};

}  // namespace aqmsim::transport
