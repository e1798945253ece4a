#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "aqmsim/qdisc/qdisc.hpp"

namespace aqmsim::metrics {

struct DelaySample {
  double time_s = 0;
  double avg_qdelay_s = 0;
  double drop_prob = 0;
  std::uint64_t backlog_bytes = 0;
  std::uint64_t drops_cum = 0;
};

/// Periodic qdisc statistics for one interface.
struct DelaySeries {
  std::string iface;
  std::vector<DelaySample> samples;

  void record(double time_s, const qdisc::QdiscStats& s) {
    samples.push_back({time_s, s.avg_qdelay_s, s.drop_prob, s.backlog_bytes, s.dropped});
  }

  /// Mean of avg_qdelay over samples taken at or after `from_s`.
  double mean_qdelay_after(double from_s) const {
    double sum = 0.0;
    std::size_t n = 0;
    for (const auto& s : samples) {
      if (s.time_s >= from_s) {
        sum += s.avg_qdelay_s;
        ++n;
      }
    }
    return n ? sum / static_cast<double>(n) : 0.0;
  }
};

}  // namespace aqmsim::metrics
