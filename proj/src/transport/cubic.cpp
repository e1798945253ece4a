#include "aqmsim/transport/cubic.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace aqmsim::transport {

double cubic_k(double w_max_segments) {
  return std::cbrt(w_max_segments * (1.0 - kCubicBeta) / kCubicC);
}

double cubic_window_from(double t, double origin_bytes, double k, double mss) {
  const double d = t - k;
  const double w = kCubicC * d * d * d + origin_bytes / mss;
  return std::max(w * mss, 2.0 * mss);
}

double cubic_window(double t, double w_max_bytes, double mss) {
  return cubic_window_from(t, w_max_bytes, cubic_k(w_max_bytes / mss), mss);
}

void RttEstimator::on_sample(double rtt_s) {
  if (!has_sample_) {
    srtt_ = rtt_s;
    rttvar_ = rtt_s / 2;
    has_sample_ = true;
  } else {
    rttvar_ = 0.75 * rttvar_ + 0.25 * std::abs(srtt_ - rtt_s);
    srtt_ = 0.875 * srtt_ + 0.125 * rtt_s;
  }
  rto_ = std::clamp(srtt_ + 4 * rttvar_, min_rto_, max_rto_);
}

void RttEstimator::backoff() { rto_ = std::min(rto_ * 2, max_rto_); }

CubicController::CubicController(double mss, double initial_cwnd_bytes)
    : mss_(mss), cwnd_(initial_cwnd_bytes), ssthresh_(std::numeric_limits<double>::infinity()) {}

void CubicController::on_ack(engine::Time now) {
  if (in_slow_start()) {
    cwnd_ += mss_;
    return;
  }
  if (!epoch_start_) {
    epoch_start_ = now;
    if (w_max_ <= cwnd_) {
      origin_ = cwnd_;
      k_ = 0.0;
    } else {
      origin_ = w_max_;
      k_ = std::cbrt((w_max_ - cwnd_) / mss_ / kCubicC);
    }
  }
  const double target = cubic_window_from((now - *epoch_start_).to_seconds(), origin_, k_, mss_);
  if (target > cwnd_) {
    cwnd_ += mss_ * (target - cwnd_) / cwnd_;
  } else {
    cwnd_ += 0.01 * mss_ * mss_ / cwnd_;
  }
}

void CubicController::on_fast_retransmit(engine::Time now) {
  w_max_ = cwnd_;
  cwnd_ = std::max(kCubicBeta * cwnd_, 2 * mss_);
  ssthresh_ = cwnd_;
  epoch_start_ = now;
  origin_ = w_max_;
  k_ = cubic_k(w_max_ / mss_);
}

void CubicController::on_timeout() {
  const double prev = cwnd_;
  w_max_ = prev;
  ssthresh_ = std::max(kCubicBeta * prev, 2 * mss_);
  cwnd_ = 2 * mss_;
  epoch_start_.reset();
}

void CubicController::on_idle_restart(double restart_cwnd_bytes) {
  ssthresh_ = std::max(ssthresh_, 0.75 * cwnd_);
  cwnd_ = std::min(cwnd_, restart_cwnd_bytes);
  epoch_start_.reset();
}

}  // namespace aqmsim::transport
