#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "aqmsim/cli/scenario.hpp"
#include "aqmsim/metrics/delay_series.hpp"
#include "aqmsim/metrics/qoe.hpp"

namespace aqmsim::cli {

struct FlowResult {
  std::string label;  // "ftp:H1->S1#0", "cbr:H1->S1#3"
  std::uint64_t window_bytes = 0;
  double window_bps = 0;
};

struct InterfaceResult {
  std::string iface;
  qdisc::QdiscStats final_stats;
  double mean_qdelay_after_warmup_s = 0;
  double max_qdelay_s = 0;
  bool conserved = true;
};

struct SampleResult {
  std::uint32_t index = 0;
  std::uint64_t seed = 0;
  bool ok = true;
  std::string error;

  std::optional<metrics::QoeReport> video;
  std::optional<metrics::QoeReport> audio;
  bool dash_aborted = false;
  double video_stall_s = 0;
  double audio_stall_s = 0;

  std::vector<metrics::DelaySeries> delay;  // one per AQM interface
  std::vector<InterfaceResult> interfaces;  // every interface
  std::vector<FlowResult> flows;
  double flow_jain = 1.0;

  std::uint64_t http_issued = 0;
  std::uint64_t http_completed = 0;
  std::uint64_t http_incomplete = 0;
  std::uint64_t voip_sent = 0;
  std::uint64_t voip_received = 0;
  double voip_mean_delay_s = 0;

  topology::NetworkCounters counters;
  bool conserved = true;
  std::vector<std::string> conservation_errors;
  std::uint64_t events_executed = 0;
};

struct RunReport {
  ScenarioConfig config;
  std::string digest;
  std::vector<SampleResult> samples;

  bool ok() const;
};

/// One seeded run of the scenario.  Never throws; failures land in `error`.
SampleResult run_sample(const ScenarioConfig& config, std::uint32_t index);

/// All samples, `workers` at a time, ordered by sample index.
RunReport run_experiment(const ScenarioConfig& config, unsigned workers = 1);

/// Writes qoe_samples.csv, delay_series.csv, per-sample delay files,
/// summary.json and scenario_effective.json into `dir`.
void write_outputs(const RunReport& report, const std::filesystem::path& dir);

/// Header of qoe_samples.csv.
inline constexpr const char* kQoeCsvHeader =
    "sample,seed,media,switches,avg_bitrate_bps,avg_throughput_bps,avg_buffer_s,avg_app_rtt_s,"
    "avg_app_jitter_s,stalls,startup_s";
inline constexpr const char* kDelayCsvHeader =
    "time_s,iface,avg_qdelay_ms,drop_prob,backlog_bytes,drops_cum";

}  // namespace aqmsim::cli
