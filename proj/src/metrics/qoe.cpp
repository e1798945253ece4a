#include "aqmsim/metrics/qoe.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <stdexcept>

namespace aqmsim::metrics {

std::string_view to_string(MediaType m) { return m == MediaType::Video ? "video" : "audio"; }

std::uint64_t count_switches(std::span<const double> bitrates) {
  std::uint64_t n = 0;
  for (std::size_t i = 1; i < bitrates.size(); ++i) {
    if (bitrates[i] != bitrates[i - 1]) ++n;
  }
  return n;
}

double avg_throughput(std::span<const SegmentRecord> log) {
  if (log.empty()) return 0.0;
  double sum = 0.0;
  for (const auto& s : log) sum += 8.0 * static_cast<double>(s.bytes) / s.download_time_s();
  return sum / static_cast<double>(log.size());
}

double avg_jitter(std::span<const double> rtts) {
  if (rtts.size() < 2) return 0.0;
  double sum = 0.0;
  for (std::size_t i = 1; i < rtts.size(); ++i) sum += std::abs(rtts[i] - rtts[i - 1]);
  return sum / static_cast<double>(rtts.size() - 1);
}

double avg_buffer(std::span<const BufferSample> samples) {
  if (samples.empty()) return 0.0;
  if (samples.size() == 1) return samples.front().level_s;
  double weighted = 0.0;
  double span_s = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const double w = i + 1 < samples.size() ? samples[i + 1].time_s - samples[i].time_s
                                            : samples[i].time_s - samples[i - 1].time_s;
    weighted += samples[i].level_s * w;
    span_s += w;
  }
  return span_s > 0 ? weighted / span_s : samples.back().level_s;
}

double mean(std::span<const double> xs) {
  if (xs.empty()) return 0.0;
  double s = 0.0;
  for (double x : xs) s += x;
  return s / static_cast<double>(xs.size());
}

double median(std::vector<double> xs) {
  if (xs.empty()) return 0.0;
  std::sort(xs.begin(), xs.end());
  const std::size_t n = xs.size();
  return n % 2 ? xs[n / 2] : 0.5 * (xs[n / 2 - 1] + xs[n / 2]);
}

double jain_index(std::span<const double> xs) {
  double sum = 0.0;
  double sq = 0.0;
  for (double x : xs) {
    sum += x;
    sq += x * x;
  }
  if (xs.empty() || sq == 0.0) return 1.0;
  return sum * sum / (static_cast<double>(xs.size()) * sq);
}

QoeReport make_report(MediaType media, std::span<const SegmentRecord> log,
                      std::span<const BufferSample> buffer, std::uint64_t stalls,
                      double startup_s) {
  std::vector<double> bitrates;
  std::vector<double> rtts;
  for (const auto& s : log) {
    bitrates.push_back(s.bitrate_bps);
    rtts.push_back(s.download_time_s());
  }
  QoeReport r;
  r.media = media;
  r.switches = count_switches(bitrates);
  // Fixed-duration segments: duration weighting reduces to the plain mean.
  r.avg_bitrate_bps = mean(bitrates);
  r.avg_throughput_bps = avg_throughput(log);
  r.avg_buffer_s = avg_buffer(buffer);
  r.avg_app_rtt_s = mean(rtts);
  r.avg_app_jitter_s = avg_jitter(rtts);
  r.stalls = stalls;
  r.startup_s = startup_s;
  r.segments = log.size();
  return r;
}

namespace {

FieldSummary summarize(std::span<const QoeReport> xs, const std::function<double(const QoeReport&)>& f) {
  double m = 0.0;
  for (const auto& x : xs) m += f(x);
  m /= static_cast<double>(xs.size());
  double v = 0.0;
  for (const auto& x : xs) v += (f(x) - m) * (f(x) - m);
  v /= static_cast<double>(xs.size());
  return {m, std::sqrt(v)};
}

}  // namespace

QoeSummary aggregate(std::span<const QoeReport> samples) {
  if (samples.empty()) throw std::invalid_argument("aggregate: no samples");
  const MediaType media = samples.front().media;
  for (const auto& s : samples) {
    if (s.media != media) throw std::invalid_argument("aggregate: mixed media types");
  }
  QoeSummary out;
  out.media = media;
  out.count = samples.size();
  out.switches = summarize(samples, [](const QoeReport& r) { return static_cast<double>(r.switches); });
  out.avg_bitrate_bps = summarize(samples, [](const QoeReport& r) { return r.avg_bitrate_bps; });
  out.avg_throughput_bps = summarize(samples, [](const QoeReport& r) { return r.avg_throughput_bps; });
  out.avg_buffer_s = summarize(samples, [](const QoeReport& r) { return r.avg_buffer_s; });
  out.avg_app_rtt_s = summarize(samples, [](const QoeReport& r) { return r.avg_app_rtt_s; });
  out.avg_app_jitter_s = summarize(samples, [](const QoeReport& r) { return r.avg_app_jitter_s; });
  out.stalls = summarize(samples, [](const QoeReport& r) { return static_cast<double>(r.stalls); });
  out.startup_s = summarize(samples, [](const QoeReport& r) { return r.startup_s; });
  return out;
}

}  // namespace aqmsim::metrics
