#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "aqmsim/apps/dash.hpp"
#include "aqmsim/apps/traffic.hpp"
#include "aqmsim/topology/network.hpp"

namespace aqmsim::cli {

struct DashTraffic {
  std::string client;
  std::string server;
  /// Named routes from server to client; one subflow each.
  std::vector<std::string> paths;
  apps::DashConfig config;
  double start_s = 0.0;
};

struct FtpTraffic {
  std::string from;
  std::string to;
  std::uint32_t count = 1;
  /// Flow i starts at a uniform random time in [0, start_spread_s).
  double start_spread_s = 0.5;
};

struct VoipTraffic {
  std::string a;
  std::string b;
  apps::VoipConfig config;
  double start_s = 0.0;
};

struct HttpTraffic {
  std::string client;
  std::string server;
  apps::HttpConfig config;
  double start_s = 0.0;
};

struct CbrTraffic {
  std::string from;
  std::string to;
  std::uint32_t count = 1;
  double rate_bps = 1e6;
  std::uint32_t packet_bytes = 1500;
  double start_s = 0.0;
};

struct RunSettings {
  double horizon_s = 0;
  double sample_interval_s = 0.1;
  std::uint32_t samples = 1;
  std::uint64_t seed = 1;
  /// Delay and fairness statistics ignore samples before this time.
  double warmup_s = 10.0;
  /// Window at the end of the run over which flow fairness is measured.
  double fairness_window_s = 10.0;
};

struct ScenarioConfig {
  std::string name;
  std::string description;
  RunSettings run;
  topology::TopologySpec topology;
  /// Interfaces that carry the experiment's AQM (also listed in
  /// topology.interface_qdiscs).
  std::vector<std::string> aqm_interfaces;
  topology::QdiscSpec aqm;
  std::optional<DashTraffic> dash;
  std::vector<FtpTraffic> ftp;
  std::vector<VoipTraffic> voip;
  std::vector<HttpTraffic> http;
  std::vector<CbrTraffic> cbr;
};

/// Command-line values that replace the file's.
struct Overrides {
  std::optional<topology::QdiscKind> qdisc;
  std::optional<double> target_ms;
  std::optional<std::uint32_t> samples;
  std::optional<std::uint64_t> seed;
  std::optional<double> horizon_s;
};

/// Parses and validates a scenario.  Throws ConfigError naming the line and
/// field of the first problem.
ScenarioConfig parse_scenario(const std::string& yaml_text);
ScenarioConfig load_scenario(const std::string& path);

/// Applies overrides and re-validates.
ScenarioConfig apply_overrides(ScenarioConfig config, const Overrides& o);

/// Cross-checks node, route and interface references.  Throws ConfigError.
void validate(const ScenarioConfig& config);

/// Parses "15ms", "0.015s", "15 ms" or a bare number of seconds.
double parse_duration_s(const std::string& text);

/// Canonical JSON rendering of the effective configuration.
std::string canonical_json(const ScenarioConfig& config);
/// FNV-1a 64 of canonical_json, as 16 hex digits.
std::string scenario_digest(const ScenarioConfig& config);

}  // namespace aqmsim::cli
