#include "aqmsim/cli/scenario.hpp"

#include <yaml-cpp/yaml.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <json.hpp>
#include <set>
#include <sstream>

#include "aqmsim/topology/config_error.hpp"

namespace aqmsim::cli {
namespace {

using topology::QdiscKind;
using topology::QdiscSpec;

int line_of(const YAML::Node& n) { return n.Mark().is_null() ? 0 : n.Mark().line + 1; }

std::string join(const std::string& path, const std::string& key) {
  return path.empty() ? key : path + "." + key;
}

void check_map(const YAML::Node& n, const std::string& path) {
  if (!n.IsMap()) throw ConfigError("expected a mapping", path, line_of(n));
}

void check_keys(const YAML::Node& n, const std::string& path,
                std::initializer_list<const char*> allowed) {
  check_map(n, path);
  const std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& kv : n) {
    const auto key = kv.first.as<std::string>();
    if (!ok.contains(key)) throw ConfigError("unknown key", join(path, key), line_of(kv.first));
  }
}

template <typename T>
T scalar(const YAML::Node& n, const std::string& field) {
  if (!n.IsScalar()) throw ConfigError("expected a scalar", field, line_of(n));
  try {
    return n.as<T>();
  } catch (const YAML::Exception&) {
    throw ConfigError("bad value '" + n.Scalar() + "'", field, line_of(n));
  }
}

template <typename T>
T required(const YAML::Node& parent, const char* key, const std::string& path) {
  const auto n = parent[key];
  if (!n) throw ConfigError("missing required field", join(path, key), line_of(parent));
  return scalar<T>(n, join(path, key));
}

template <typename T>
void optional_into(const YAML::Node& parent, const char* key, const std::string& path, T& out) {
  const auto n = parent[key];
  if (n) out = scalar<T>(n, join(path, key));
}

double positive(double v, const std::string& field, int line) {
  if (!(v > 0) || !std::isfinite(v)) throw ConfigError("must be positive", field, line);
  return v;
}

double duration_field(const YAML::Node& n, const std::string& field) {
  const auto text = scalar<std::string>(n, field);
  try {
    return parse_duration_s(text);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what(), field, line_of(n));
  }
}

std::vector<std::string> string_list(const YAML::Node& n, const std::string& field) {
  if (!n.IsSequence()) throw ConfigError("expected a list", field, line_of(n));
  std::vector<std::string> out;
  for (std::size_t i = 0; i < n.size(); ++i) {
    out.push_back(scalar<std::string>(n[i], field + "[" + std::to_string(i) + "]"));
  }
  return out;
}

QdiscKind kind_field(const YAML::Node& n, const std::string& field) {
  const auto text = scalar<std::string>(n, field);
  const auto k = topology::parse_qdisc_kind(text);
  if (!k) throw ConfigError("unknown qdisc '" + text + "'", field, line_of(n));
  return *k;
}

QdiscSpec parse_qdisc(const YAML::Node& n, const std::string& path, bool allow_interfaces) {
  if (allow_interfaces) {
    check_keys(n, path, {"kind", "target", "t_update", "alpha", "beta", "max_burst",
                         "limit_packets", "buckets", "quantum", "limit_bytes", "salt",
                         "interfaces"});
  } else {
    check_keys(n, path, {"kind", "target", "t_update", "alpha", "beta", "max_burst",
                         "limit_packets", "buckets", "quantum", "limit_bytes", "salt"});
  }
  QdiscSpec q;
  if (!n["kind"]) throw ConfigError("missing required field", join(path, "kind"), line_of(n));
  q.kind = kind_field(n["kind"], join(path, "kind"));
  auto& pie = q.pie;
  if (n["target"]) pie.target_s = duration_field(n["target"], join(path, "target"));
  if (n["t_update"]) pie.t_update_s = duration_field(n["t_update"], join(path, "t_update"));
  if (n["max_burst"]) pie.max_burst_s = duration_field(n["max_burst"], join(path, "max_burst"));
  optional_into(n, "alpha", path, pie.alpha);
  optional_into(n, "beta", path, pie.beta);
  if (pie.target_s < 0) throw ConfigError("must not be negative", join(path, "target"), line_of(n));
  positive(pie.t_update_s, join(path, "t_update"), line_of(n));
  if (n["limit_packets"]) {
    const auto limit = scalar<std::uint32_t>(n["limit_packets"], join(path, "limit_packets"));
    if (limit == 0) throw ConfigError("must be positive", join(path, "limit_packets"), line_of(n));
    q.droptail_limit_packets = limit;
    pie.limit_packets = limit;
    q.fq_pie.limit_packets = limit;
  }
  optional_into(n, "buckets", path, q.fq_pie.num_buckets);
  optional_into(n, "quantum", path, q.fq_pie.quantum);
  optional_into(n, "limit_bytes", path, q.fq_pie.limit_bytes);
  optional_into(n, "salt", path, q.fq_pie.salt);
  const auto b = q.fq_pie.num_buckets;
  if (b == 0 || (b & (b - 1)) != 0) {
    throw ConfigError("must be a power of two", join(path, "buckets"), line_of(n));
  }
  if (q.fq_pie.quantum == 0) throw ConfigError("must be positive", join(path, "quantum"), line_of(n));
  q.fq_pie.pie = pie;
  return q;
}

void parse_run(const YAML::Node& n, RunSettings& r) {
  const std::string path = "run";
  check_keys(n, path, {"horizon_s", "sample_interval_s", "samples", "seed", "warmup_s",
                       "fairness_window_s"});
  r.horizon_s = positive(required<double>(n, "horizon_s", path), "run.horizon_s", line_of(n));
  optional_into(n, "sample_interval_s", path, r.sample_interval_s);
  positive(r.sample_interval_s, "run.sample_interval_s", line_of(n));
  optional_into(n, "samples", path, r.samples);
  if (r.samples == 0) throw ConfigError("must be positive", "run.samples", line_of(n));
  optional_into(n, "seed", path, r.seed);
  optional_into(n, "warmup_s", path, r.warmup_s);
  optional_into(n, "fairness_window_s", path, r.fairness_window_s);
  if (r.warmup_s < 0) throw ConfigError("must not be negative", "run.warmup_s", line_of(n));
  positive(r.fairness_window_s, "run.fairness_window_s", line_of(n));
}

void parse_topology(const YAML::Node& n, topology::TopologySpec& t) {
  check_keys(n, "topology", {"nodes", "links", "routes"});
  if (!n["nodes"]) throw ConfigError("missing required field", "topology.nodes", line_of(n));
  t.nodes = string_list(n["nodes"], "topology.nodes");
  const auto links = n["links"];
  if (!links) throw ConfigError("missing required field", "topology.links", line_of(n));
  if (!links.IsSequence()) throw ConfigError("expected a list", "topology.links", line_of(links));
  for (std::size_t i = 0; i < links.size(); ++i) {
    const auto l = links[i];
    const std::string path = "topology.links[" + std::to_string(i) + "]";
    check_keys(l, path, {"a", "b", "rate_mbps", "delay_ms", "reverse_rate_mbps",
                         "reverse_delay_ms"});
    topology::LinkSpec s;
    s.a = required<std::string>(l, "a", path);
    s.b = required<std::string>(l, "b", path);
    const double rate = positive(required<double>(l, "rate_mbps", path),
                                 join(path, "rate_mbps"), line_of(l));
    const double delay = required<double>(l, "delay_ms", path);
    if (delay < 0) throw ConfigError("must not be negative", join(path, "delay_ms"), line_of(l));
    double rrate = rate;
    double rdelay = delay;
    optional_into(l, "reverse_rate_mbps", path, rrate);
    optional_into(l, "reverse_delay_ms", path, rdelay);
    positive(rrate, join(path, "reverse_rate_mbps"), line_of(l));
    if (rdelay < 0) {
      throw ConfigError("must not be negative", join(path, "reverse_delay_ms"), line_of(l));
    }
    s.rate_ab_bps = rate * 1e6;
    s.rate_ba_bps = rrate * 1e6;
    s.delay_ab = engine::Time::seconds(delay * 1e-3);
    s.delay_ba = engine::Time::seconds(rdelay * 1e-3);
    t.links.push_back(std::move(s));
  }
  if (const auto routes = n["routes"]) {
    if (!routes.IsSequence()) {
      throw ConfigError("expected a list", "topology.routes", line_of(routes));
    }
    for (std::size_t i = 0; i < routes.size(); ++i) {
      const auto r = routes[i];
      const std::string path = "topology.routes[" + std::to_string(i) + "]";
      check_keys(r, path, {"name", "hops"});
      topology::RouteSpec s;
      s.name = required<std::string>(r, "name", path);
      if (!r["hops"]) throw ConfigError("missing required field", join(path, "hops"), line_of(r));
      s.hops = string_list(r["hops"], join(path, "hops"));
      t.routes.push_back(std::move(s));
    }
  }
}

void parse_manifest(const YAML::Node& n, apps::Manifest& m) {
  const std::string path = "traffic.dash.manifest";
  check_keys(n, path, {"segment_s", "total_s", "video_kbps", "audio_kbps"});
  optional_into(n, "segment_s", path, m.segment_duration_s);
  optional_into(n, "total_s", path, m.total_duration_s);
  auto ladder = [&](const char* key, std::vector<apps::Representation>& out) {
    const auto l = n[key];
    if (!l) return;
    const std::string field = join(path, key);
    if (!l.IsSequence()) throw ConfigError("expected a list", field, line_of(l));
    out.clear();
    for (std::size_t i = 0; i < l.size(); ++i) {
      const double kbps = scalar<double>(l[i], field + "[" + std::to_string(i) + "]");
      out.push_back({kbps * 1e3, std::to_string(static_cast<long long>(kbps)) + "k"});
    }
  };
  ladder("video_kbps", m.video);
  ladder("audio_kbps", m.audio);
  try {
    m.validate();
  } catch (const ConfigError& e) {
    throw ConfigError(e.message(), path, line_of(n));
  }
}

DashTraffic parse_dash(const YAML::Node& n) {
  const std::string path = "traffic.dash";
  check_keys(n, path, {"client", "server", "paths", "start_s", "max_buffer_s",
                       "resume_threshold_s", "abr_safety", "abr_ewma_weight", "request_bytes",
                       "manifest"});
  DashTraffic d;
  d.client = required<std::string>(n, "client", path);
  d.server = required<std::string>(n, "server", path);
  if (!n["paths"]) throw ConfigError("missing required field", join(path, "paths"), line_of(n));
  d.paths = string_list(n["paths"], join(path, "paths"));
  if (d.paths.empty()) throw ConfigError("needs at least one path", join(path, "paths"), line_of(n));
  optional_into(n, "start_s", path, d.start_s);
  auto& c = d.config;
  optional_into(n, "max_buffer_s", path, c.max_buffer_s);
  optional_into(n, "resume_threshold_s", path, c.resume_threshold_s);
  optional_into(n, "abr_safety", path, c.abr_safety);
  optional_into(n, "abr_ewma_weight", path, c.abr_ewma_weight);
  optional_into(n, "request_bytes", path, c.request_bytes);
  positive(c.max_buffer_s, join(path, "max_buffer_s"), line_of(n));
  positive(c.abr_safety, join(path, "abr_safety"), line_of(n));
  if (!(c.abr_ewma_weight > 0 && c.abr_ewma_weight <= 1)) {
    throw ConfigError("must be in (0, 1]", join(path, "abr_ewma_weight"), line_of(n));
  }
  if (c.resume_threshold_s < 0 || c.resume_threshold_s > c.max_buffer_s) {
    throw ConfigError("must be within [0, max_buffer_s]", join(path, "resume_threshold_s"),
                      line_of(n));
  }
  if (n["manifest"]) parse_manifest(n["manifest"], c.manifest);
  if (c.manifest.segment_duration_s > c.max_buffer_s) {
    throw ConfigError("segment longer than the buffer", join(path, "max_buffer_s"), line_of(n));
  }
  return d;
}

template <typename T, typename F>
std::vector<T> parse_list(const YAML::Node& n, const std::string& path, F&& one) {
  if (!n.IsSequence()) throw ConfigError("expected a list", path, line_of(n));
  std::vector<T> out;
  for (std::size_t i = 0; i < n.size(); ++i) {
    out.push_back(one(n[i], path + "[" + std::to_string(i) + "]"));
  }
  return out;
}

void parse_traffic(const YAML::Node& n, ScenarioConfig& c) {
  check_keys(n, "traffic", {"dash", "ftp", "voip", "http", "cbr"});
  if (n["dash"]) c.dash = parse_dash(n["dash"]);
  if (n["ftp"]) {
    c.ftp = parse_list<FtpTraffic>(n["ftp"], "traffic.ftp", [](const YAML::Node& e,
                                                              const std::string& p) {
      check_keys(e, p, {"from", "to", "count", "start_spread_s"});
      FtpTraffic f;
      f.from = required<std::string>(e, "from", p);
      f.to = required<std::string>(e, "to", p);
      optional_into(e, "count", p, f.count);
      optional_into(e, "start_spread_s", p, f.start_spread_s);
      if (f.count == 0) throw ConfigError("must be positive", join(p, "count"), line_of(e));
      if (f.start_spread_s < 0) {
        throw ConfigError("must not be negative", join(p, "start_spread_s"), line_of(e));
      }
      return f;
    });
  }
  if (n["voip"]) {
    c.voip = parse_list<VoipTraffic>(n["voip"], "traffic.voip", [](const YAML::Node& e,
                                                                  const std::string& p) {
      check_keys(e, p, {"a", "b", "calls_per_second", "call_duration_s", "packet_bytes",
                        "packet_interval_ms", "start_s"});
      VoipTraffic v;
      v.a = required<std::string>(e, "a", p);
      v.b = required<std::string>(e, "b", p);
      optional_into(e, "calls_per_second", p, v.config.calls_per_second);
      optional_into(e, "call_duration_s", p, v.config.call_duration_s);
      optional_into(e, "packet_bytes", p, v.config.packet_bytes);
      double interval_ms = v.config.packet_interval_s * 1e3;
      optional_into(e, "packet_interval_ms", p, interval_ms);
      v.config.packet_interval_s = interval_ms * 1e-3;
      optional_into(e, "start_s", p, v.start_s);
      positive(v.config.calls_per_second, join(p, "calls_per_second"), line_of(e));
      positive(v.config.call_duration_s, join(p, "call_duration_s"), line_of(e));
      positive(v.config.packet_interval_s, join(p, "packet_interval_ms"), line_of(e));
      if (v.config.packet_bytes == 0 || v.config.packet_bytes > transport::kMtu) {
        throw ConfigError("must be in 1..1500", join(p, "packet_bytes"), line_of(e));
      }
      return v;
    });
  }
  if (n["http"]) {
    c.http = parse_list<HttpTraffic>(n["http"], "traffic.http", [](const YAML::Node& e,
                                                                  const std::string& p) {
      check_keys(e, p, {"client", "server", "rate", "request_bytes", "response_bytes",
                        "duration_s", "start_s"});
      HttpTraffic h;
      h.client = required<std::string>(e, "client", p);
      h.server = required<std::string>(e, "server", p);
      optional_into(e, "rate", p, h.config.requests_per_second);
      optional_into(e, "request_bytes", p, h.config.request_bytes);
      optional_into(e, "response_bytes", p, h.config.response_bytes);
      optional_into(e, "duration_s", p, h.config.duration_s);
      optional_into(e, "start_s", p, h.start_s);
      positive(h.config.requests_per_second, join(p, "rate"), line_of(e));
      if (h.config.duration_s < 0) {
        throw ConfigError("must not be negative", join(p, "duration_s"), line_of(e));
      }
      return h;
    });
  }
  if (n["cbr"]) {
    c.cbr = parse_list<CbrTraffic>(n["cbr"], "traffic.cbr", [](const YAML::Node& e,
                                                              const std::string& p) {
      check_keys(e, p, {"from", "to", "count", "rate_mbps", "packet_bytes", "start_s"});
      CbrTraffic b;
      b.from = required<std::string>(e, "from", p);
      b.to = required<std::string>(e, "to", p);
      optional_into(e, "count", p, b.count);
      double mbps = b.rate_bps / 1e6;
      optional_into(e, "rate_mbps", p, mbps);
      b.rate_bps = positive(mbps, join(p, "rate_mbps"), line_of(e)) * 1e6;
      optional_into(e, "packet_bytes", p, b.packet_bytes);
      optional_into(e, "start_s", p, b.start_s);
      if (b.count == 0) throw ConfigError("must be positive", join(p, "count"), line_of(e));
      if (b.packet_bytes == 0 || b.packet_bytes > transport::kMtu) {
        throw ConfigError("must be in 1..1500", join(p, "packet_bytes"), line_of(e));
      }
      return b;
    });
  }
}

void sync_aqm(ScenarioConfig& c) {
  c.topology.interface_qdiscs.clear();
  for (const auto& label : c.aqm_interfaces) c.topology.interface_qdiscs[label] = c.aqm;
}

}  // namespace

double parse_duration_s(const std::string& text) {
  std::size_t i = 0;
  while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
  const std::size_t start = i;
  while (i < text.size() && (std::isdigit(static_cast<unsigned char>(text[i])) ||
                             text[i] == '.' || text[i] == 'e' || text[i] == 'E' ||
                             ((text[i] == '-' || text[i] == '+') &&
                              (i == start || text[i - 1] == 'e' || text[i - 1] == 'E')))) {
    ++i;
  }
  const std::string number = text.substr(start, i - start);
  while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
  const std::string unit = text.substr(i);
  double v = 0;
  try {
    std::size_t used = 0;
    v = std::stod(number, &used);
    if (used != number.size()) throw std::invalid_argument("");
  } catch (const std::exception&) {
    throw std::invalid_argument("bad duration '" + text + "'");
  }
  if (unit.empty() || unit == "s") return v;
  if (unit == "ms") return v * 1e-3;
  if (unit == "us") return v * 1e-6;
  throw std::invalid_argument("bad duration unit '" + unit + "'");
}

ScenarioConfig parse_scenario(const std::string& yaml_text) {
  YAML::Node root;
  try {
    root = YAML::Load(yaml_text);
  } catch (const YAML::ParserException& e) {
    throw ConfigError(e.msg, "", e.mark.line + 1);
  }
  if (!root || root.IsNull()) throw ConfigError("empty scenario");
  check_keys(root, "", {"name", "description", "run", "topology", "aqm", "default_qdisc",
                        "traffic"});
  ScenarioConfig c;
  c.name = required<std::string>(root, "name", "");
  optional_into(root, "description", "", c.description);
  if (!root["run"]) throw ConfigError("missing required field", "run", line_of(root));
  parse_run(root["run"], c.run);
  if (!root["topology"]) throw ConfigError("missing required field", "topology", line_of(root));
  parse_topology(root["topology"], c.topology);
  if (const auto aqm = root["aqm"]) {
    c.aqm = parse_qdisc(aqm, "aqm", true);
    if (aqm["interfaces"]) c.aqm_interfaces = string_list(aqm["interfaces"], "aqm.interfaces");
  }
  if (const auto d = root["default_qdisc"]) {
    c.topology.default_qdisc = parse_qdisc(d, "default_qdisc", false);
  }
  if (root["traffic"]) parse_traffic(root["traffic"], c);
  sync_aqm(c);
  validate(c);
  return c;
}

ScenarioConfig load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read scenario file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_scenario(ss.str());
}

ScenarioConfig apply_overrides(ScenarioConfig c, const Overrides& o) {
  if (o.qdisc) c.aqm.kind = *o.qdisc;
  if (o.target_ms) {
    if (!(*o.target_ms >= 0)) throw ConfigError("must not be negative", "--target-ms");
    c.aqm.pie.target_s = *o.target_ms * 1e-3;
    c.aqm.fq_pie.pie.target_s = c.aqm.pie.target_s;
  }
  if (o.samples) {
    if (*o.samples == 0) throw ConfigError("must be positive", "--samples");
    c.run.samples = *o.samples;
  }
  if (o.seed) c.run.seed = *o.seed;
  if (o.horizon_s) {
    if (!(*o.horizon_s > 0)) throw ConfigError("must be positive", "--horizon-s");
    c.run.horizon_s = *o.horizon_s;
  }
  sync_aqm(c);
  validate(c);
  return c;
}

void validate(const ScenarioConfig& c) {
  const std::set<std::string> nodes(c.topology.nodes.begin(), c.topology.nodes.end());
  if (nodes.size() != c.topology.nodes.size()) {
    throw ConfigError("duplicate node name", "topology.nodes");
  }
  auto node = [&](const std::string& n, const std::string& field) {
    if (!nodes.contains(n)) throw ConfigError("unknown node " + n, field);
  };
  std::set<std::pair<std::string, std::string>> links;
  for (const auto& l : c.topology.links) {
    node(l.a, "topology.links");
    node(l.b, "topology.links");
    if (l.a == l.b) throw ConfigError("self link at '" + l.a + "'", "topology.links");
    links.insert({l.a, l.b});
    links.insert({l.b, l.a});
  }
  std::set<std::string> route_names;
  for (const auto& r : c.topology.routes) {
    if (!route_names.insert(r.name).second) {
      throw ConfigError("duplicate route '" + r.name + "'", "topology.routes");
    }
    if (r.hops.size() < 2) throw ConfigError("route '" + r.name + "' too short", "topology.routes");
    for (std::size_t i = 0; i < r.hops.size(); ++i) {
      node(r.hops[i], "topology.routes." + r.name);
      if (i > 0 && !links.contains({r.hops[i - 1], r.hops[i]})) {
        throw ConfigError("no link between " + r.hops[i - 1] + " and " + r.hops[i],
                          "topology.routes." + r.name);
      }
    }
  }
  for (const auto& label : c.aqm_interfaces) {
    const auto arrow = label.find("->");
    if (arrow == std::string::npos ||
        !links.contains({label.substr(0, arrow), label.substr(arrow + 2)})) {
      throw ConfigError("no interface '" + label + "'", "aqm.interfaces");
    }
  }
  if (c.dash) {
    node(c.dash->client, "traffic.dash.client");
    node(c.dash->server, "traffic.dash.server");
    for (const auto& p : c.dash->paths) {
      const auto it = std::find_if(c.topology.routes.begin(), c.topology.routes.end(),
                                   [&](const auto& r) { return r.name == p; });
      if (it == c.topology.routes.end()) {
        throw ConfigError("unknown route '" + p + "'", "traffic.dash.paths");
      }
      if (it->hops.front() != c.dash->server || it->hops.back() != c.dash->client) {
        throw ConfigError("route '" + p + "' does not run from server to client",
                          "traffic.dash.paths");
      }
    }
  }
  for (const auto& f : c.ftp) {
    node(f.from, "traffic.ftp.from");
    node(f.to, "traffic.ftp.to");
  }
  for (const auto& v : c.voip) {
    node(v.a, "traffic.voip.a");
    node(v.b, "traffic.voip.b");
  }
  for (const auto& h : c.http) {
    node(h.client, "traffic.http.client");
    node(h.server, "traffic.http.server");
  }
  for (const auto& b : c.cbr) {
    node(b.from, "traffic.cbr.from");
    node(b.to, "traffic.cbr.to");
  }
  if (c.run.sample_interval_s > c.run.horizon_s) {
    throw ConfigError("longer than the horizon", "run.sample_interval_s");
  }
}

namespace {

nlohmann::json qdisc_json(const QdiscSpec& q) {
  // Every field is written whatever the kind, so switching kinds changes
  // exactly one entry.
  const auto& p = q.pie;
  return {{"kind", std::string(topology::to_string(q.kind))},
          {"droptail_limit_packets", q.droptail_limit_packets},
          {"target_s", p.target_s},
          {"t_update_s", p.t_update_s},
          {"alpha", p.alpha},
          {"beta", p.beta},
          {"max_burst_s", p.max_burst_s},
          {"pie_limit_packets", p.limit_packets},
          {"fq_limit_packets", q.fq_pie.limit_packets},
          {"fq_limit_bytes", q.fq_pie.limit_bytes},
          {"buckets", q.fq_pie.num_buckets},
          {"quantum", q.fq_pie.quantum},
          {"salt", q.fq_pie.salt}};
}

}  // namespace

std::string canonical_json(const ScenarioConfig& c) {
  nlohmann::json j;
  j["name"] = c.name;
  j["run"] = {{"horizon_s", c.run.horizon_s},
              {"sample_interval_s", c.run.sample_interval_s},
              {"samples", c.run.samples},
              {"seed", c.run.seed},
              {"warmup_s", c.run.warmup_s},
              {"fairness_window_s", c.run.fairness_window_s}};
  j["topology"]["nodes"] = c.topology.nodes;
  auto& links = j["topology"]["links"] = nlohmann::json::array();
  for (const auto& l : c.topology.links) {
    links.push_back({{"a", l.a},
                     {"b", l.b},
                     {"rate_ab_bps", l.rate_ab_bps},
                     {"rate_ba_bps", l.rate_ba_bps},
                     {"delay_ab_ns", l.delay_ab.ns()},
                     {"delay_ba_ns", l.delay_ba.ns()}});
  }
  auto& routes = j["topology"]["routes"] = nlohmann::json::array();
  for (const auto& r : c.topology.routes) routes.push_back({{"name", r.name}, {"hops", r.hops}});
  j["default_qdisc"] = qdisc_json(c.topology.default_qdisc);
  j["aqm"] = qdisc_json(c.aqm);
  j["aqm"]["interfaces"] = c.aqm_interfaces;
  auto& t = j["traffic"] = nlohmann::json::object();
  if (c.dash) {
    const auto& d = *c.dash;
    nlohmann::json video = nlohmann::json::array();
    nlohmann::json audio = nlohmann::json::array();
    for (const auto& r : d.config.manifest.video) video.push_back(r.bitrate_bps);
    for (const auto& r : d.config.manifest.audio) audio.push_back(r.bitrate_bps);
    t["dash"] = {{"client", d.client},
                 {"server", d.server},
                 {"paths", d.paths},
                 {"start_s", d.start_s},
                 {"max_buffer_s", d.config.max_buffer_s},
                 {"resume_threshold_s", d.config.resume_threshold_s},
                 {"abr_safety", d.config.abr_safety},
                 {"abr_ewma_weight", d.config.abr_ewma_weight},
                 {"request_bytes", d.config.request_bytes},
                 {"manifest",
                  {{"segment_s", d.config.manifest.segment_duration_s},
                   {"total_s", d.config.manifest.total_duration_s},
                   {"video_bps", video},
                   {"audio_bps", audio}}}};
  }
  t["ftp"] = nlohmann::json::array();
  for (const auto& f : c.ftp) {
    t["ftp"].push_back(
        {{"from", f.from}, {"to", f.to}, {"count", f.count}, {"start_spread_s", f.start_spread_s}});
  }
  t["voip"] = nlohmann::json::array();
  for (const auto& v : c.voip) {
    t["voip"].push_back({{"a", v.a},
                         {"b", v.b},
                         {"calls_per_second", v.config.calls_per_second},
                         {"call_duration_s", v.config.call_duration_s},
                         {"packet_bytes", v.config.packet_bytes},
                         {"packet_interval_s", v.config.packet_interval_s},
                         {"start_s", v.start_s}});
  }
  t["http"] = nlohmann::json::array();
  for (const auto& h : c.http) {
    t["http"].push_back({{"client", h.client},
                         {"server", h.server},
                         {"rate", h.config.requests_per_second},
                         {"request_bytes", h.config.request_bytes},
                         {"response_bytes", h.config.response_bytes},
                         {"duration_s", h.config.duration_s},
                         {"start_s", h.start_s}});
  }
  t["cbr"] = nlohmann::json::array();
  for (const auto& b : c.cbr) {
    t["cbr"].push_back({{"from", b.from},
                        {"to", b.to},
                        {"count", b.count},
                        {"rate_bps", b.rate_bps},
                        {"packet_bytes", b.packet_bytes},
                        {"start_s", b.start_s}});
  }
  return j.dump(2);
}

std::string scenario_digest(const ScenarioConfig& c) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const unsigned char ch : canonical_json(c)) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace aqmsim::cli
