#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace aqmsim::metrics {

enum class MediaType { Video, Audio };

std::string_view to_string(MediaType m);

/// One completed segment download.
struct SegmentRecord {
  std::uint32_t index = 0;
  double request_time_s = 0;
  double completion_time_s = 0;
  double bitrate_bps = 0;
  std::uint64_t bytes = 0;

  double download_time_s() const { return completion_time_s - request_time_s; }
};

struct BufferSample {
  double time_s = 0;
  double level_s = 0;
};

/// Per-session quality-of-experience record for one media type.
struct QoeReport {
  MediaType media = MediaType::Video;
  std::uint64_t switches = 0;
  double avg_bitrate_bps = 0;
  double avg_throughput_bps = 0;
  double avg_buffer_s = 0;
  double avg_app_rtt_s = 0;
  double avg_app_jitter_s = 0;
  std::uint64_t stalls = 0;
  double startup_s = 0;
  std::uint64_t segments = 0;
};

/// Number of adjacent pairs with different bitrates.
std::uint64_t count_switches(std::span<const double> bitrates);

/// Mean of per-segment 8*bytes/download_time; 0 for an empty log.
double avg_throughput(std::span<const SegmentRecord> log);

/// Mean absolute difference of consecutive RTTs; 0 with fewer than 2.
double avg_jitter(std::span<const double> rtts);

/// Time-weighted mean level.  Each sample holds until the next one and the
/// last holds for the preceding interval, so uniform sampling gives the plain
/// mean.  0 when empty.
double avg_buffer(std::span<const BufferSample> samples);

double mean(std::span<const double> xs);
double median(std::vector<double> xs);

/// Jain's fairness index (sum x)^2 / (n sum x^2); 1 for an empty or all-zero
/// set.
double jain_index(std::span<const double> xs);

QoeReport make_report(MediaType media, std::span<const SegmentRecord> log,
                      std::span<const BufferSample> buffer, std::uint64_t stalls,
                      double startup_s);

struct FieldSummary {
  double mean = 0;
  double stddev = 0;  // population
};

struct QoeSummary {
  MediaType media = MediaType::Video;
  std::size_t count = 0;
  FieldSummary switches;
  FieldSummary avg_bitrate_bps;
  FieldSummary avg_throughput_bps;
  FieldSummary avg_buffer_s;
  FieldSummary avg_app_rtt_s;
  FieldSummary avg_app_jitter_s;
  FieldSummary stalls;
  FieldSummary startup_s;
};

/// Per-field mean and population standard deviation.  Throws
/// std::invalid_argument for an empty list or mixed media types.
QoeSummary aggregate(std::span<const QoeReport> samples);

}  // namespace aqmsim::metrics
