#include "aqmsim/cli/runner.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <fstream>
#include <json.hpp>
#include <memory>
#include <mutex>
#include <thread>

#include "aqmsim/apps/dash.hpp"
#include "aqmsim/apps/traffic.hpp"

namespace aqmsim::cli {
namespace {

using engine::Time;

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

struct FlowProbe {
  std::string label;
  std::function<std::uint64_t()> bytes;
  std::uint64_t at_window_start = 0;
};

void check_conservation(topology::Network& net, SampleResult& r) {
  std::uint64_t drops = 0;
  std::uint64_t backlog = 0;
  for (topology::InterfaceIndex i = 0; i < net.interface_count(); ++i) {
    const auto& f = net.interface(i);
    InterfaceResult ir;
    ir.iface = f.label;
    ir.final_stats = f.qdisc->stats();
    ir.conserved = ir.final_stats.conserved();
    if (!ir.conserved) r.conservation_errors.push_back("qdisc accounting on " + f.label);
    if (ir.final_stats.dequeued != f.tx_packets) {
      r.conservation_errors.push_back("dequeued != transmitted on " + f.label);
    }
    drops += ir.final_stats.dropped;
    backlog += ir.final_stats.backlog_packets;
    r.interfaces.push_back(std::move(ir));
  }
  const auto& c = net.counters();
  if (c.delivered + c.dropped + c.unclaimed > c.injected) {
    r.conservation_errors.push_back("more packets left the network than entered");
  } else if (c.in_network() < backlog) {
    r.conservation_errors.push_back("queued packets exceed packets in the network");
  }
  if (drops != c.dropped) r.conservation_errors.push_back("qdisc drops != network drops");
  if (c.dropped_stream + c.dropped_datagram != c.dropped) {
    r.conservation_errors.push_back("drop classes do not sum");
  }
  r.counters = c;
  r.conserved = r.conservation_errors.empty();
}

void run_into(const ScenarioConfig& cfg, SampleResult& r) {
  engine::Simulator sim;
  topology::Network net(sim, r.seed, cfg.topology);
  const Time horizon = Time::seconds(cfg.run.horizon_s);

  std::unique_ptr<transport::Connection> dash_conn;
  std::unique_ptr<apps::DashServer> dash_server;
  std::unique_ptr<apps::DashClient> dash_client;
  if (cfg.dash) {
    const auto& d = *cfg.dash;
    std::vector<topology::RouteId> routes;
    for (const auto& p : d.paths) routes.push_back(net.reverse(net.named_route(p)));
    dash_conn = std::make_unique<transport::Connection>(net, net.node(d.client),
                                                        net.node(d.server), 80, routes);
    dash_server = std::make_unique<apps::DashServer>(d.config.manifest);
    dash_client = std::make_unique<apps::DashClient>(sim, *dash_conn, *dash_server, d.config);
    sim.schedule_at(Time::seconds(d.start_s), [&] {
      dash_conn->open();
      dash_client->start();
    });
  }

  std::vector<FlowProbe> probes;
  std::vector<std::unique_ptr<apps::FtpSource>> ftp;
  engine::RngStream ftp_rng(r.seed, "ftp-start");
  for (const auto& f : cfg.ftp) {
    for (std::uint32_t k = 0; k < f.count; ++k) {
      const Time start = Time::seconds(ftp_rng.uniform() * f.start_spread_s);
      auto& src = ftp.emplace_back(
          std::make_unique<apps::FtpSource>(net, net.node(f.from), net.node(f.to), start));
      apps::FtpSource* p = src.get();
      probes.push_back({"ftp:" + f.from + "->" + f.to + "#" + std::to_string(k),
                        [p] { return p->delivered_bytes(); }});
    }
  }
  std::vector<std::unique_ptr<apps::CbrSource>> cbr;
  for (const auto& b : cfg.cbr) {
    for (std::uint32_t k = 0; k < b.count; ++k) {
      auto& src = cbr.emplace_back(std::make_unique<apps::CbrSource>(
          net, net.node(b.from), net.node(b.to), b.rate_bps, b.packet_bytes,
          Time::seconds(b.start_s)));
      apps::CbrSource* p = src.get();
      probes.push_back({"cbr:" + b.from + "->" + b.to + "#" + std::to_string(k),
                        [p] { return p->received_bytes(); }});
    }
  }
  std::vector<std::unique_ptr<apps::VoipGenerator>> voip;
  for (std::size_t i = 0; i < cfg.voip.size(); ++i) {
    const auto& v = cfg.voip[i];
    voip.push_back(std::make_unique<apps::VoipGenerator>(
        net, net.node(v.a), net.node(v.b), v.config, Time::seconds(v.start_s), horizon,
        engine::RngStream(r.seed, "voip:" + std::to_string(i))));
  }
  std::vector<std::unique_ptr<apps::HttpGenerator>> http;
  for (const auto& h : cfg.http) {
    http.push_back(std::make_unique<apps::HttpGenerator>(net, net.node(h.client),
                                                         net.node(h.server), h.config,
                                                         Time::seconds(h.start_s)));
  }

  std::vector<topology::InterfaceIndex> watched;
  for (const auto& label : cfg.aqm_interfaces) {
    watched.push_back(*net.find_interface(label));
    r.delay.push_back({label, {}});
  }
  const Time interval = Time::seconds(cfg.run.sample_interval_s);
  std::function<void()> sample = [&] {
    for (std::size_t i = 0; i < watched.size(); ++i) {
      r.delay[i].record(sim.now().to_seconds(), net.interface(watched[i]).qdisc->stats());
    }
    if (dash_client) dash_client->sample_buffers();
    if (sim.now() + interval <= horizon) sim.schedule(interval, sample);
  };
  sim.schedule(interval, sample);

  const double window_s = std::min(cfg.run.fairness_window_s, cfg.run.horizon_s);
  sim.schedule_at(horizon - Time::seconds(window_s), [&] {
    for (auto& p : probes) p.at_window_start = p.bytes();
  });

  sim.run_until(horizon);

  if (dash_client) {
    dash_client->finalize();
    r.dash_aborted = dash_client->aborted();
    r.video = dash_client->report(metrics::MediaType::Video);
    r.audio = dash_client->report(metrics::MediaType::Audio);
    r.video_stall_s = dash_client->session(metrics::MediaType::Video).buffer.stall_s();
    r.audio_stall_s = dash_client->session(metrics::MediaType::Audio).buffer.stall_s();
  }
  std::vector<double> rates;
  for (auto& p : probes) {
    FlowResult f;
    f.label = p.label;
    f.window_bytes = p.bytes() - p.at_window_start;
    f.window_bps = 8.0 * static_cast<double>(f.window_bytes) / window_s;
    rates.push_back(f.window_bps);
    r.flows.push_back(std::move(f));
  }
  r.flow_jain = metrics::jain_index(rates);
  for (const auto& h : http) {
    r.http_issued += h->issued();
    r.http_completed += h->completed();
    r.http_incomplete += h->incomplete();
  }
  double delay_sum = 0;
  for (const auto& v : voip) {
    r.voip_sent += v->packets_sent();
    r.voip_received += v->packets_received();
    delay_sum += v->mean_delay_s() * static_cast<double>(v->packets_received());
  }
  r.voip_mean_delay_s = r.voip_received ? delay_sum / static_cast<double>(r.voip_received) : 0;

  check_conservation(net, r);
  for (std::size_t i = 0; i < watched.size(); ++i) {
    auto& ir = r.interfaces[watched[i]];
    ir.mean_qdelay_after_warmup_s = r.delay[i].mean_qdelay_after(cfg.run.warmup_s);
    for (const auto& s : r.delay[i].samples) ir.max_qdelay_s = std::max(ir.max_qdelay_s, s.avg_qdelay_s);
  }
  r.events_executed = sim.executed_count();
  sim.finish();
  // Sources go before the network they are bound to.
  dash_client.reset();
  dash_conn.reset();
  http.clear();
  voip.clear();
  cbr.clear();
  ftp.clear();
}

nlohmann::json field(const metrics::FieldSummary& f) {
  return {{"mean", f.mean}, {"stddev", f.stddev}};
}

nlohmann::json qoe_summary(const metrics::QoeSummary& s, const std::vector<metrics::QoeReport>& rs) {
  std::vector<double> switches;
  for (const auto& r : rs) switches.push_back(static_cast<double>(r.switches));
  return {{"count", s.count},
          {"switches", field(s.switches)},
          {"switches_median", metrics::median(switches)},
          {"avg_bitrate_bps", field(s.avg_bitrate_bps)},
          {"avg_throughput_bps", field(s.avg_throughput_bps)},
          {"avg_buffer_s", field(s.avg_buffer_s)},
          {"avg_app_rtt_s", field(s.avg_app_rtt_s)},
          {"avg_app_jitter_s", field(s.avg_app_jitter_s)},
          {"stalls", field(s.stalls)},
          {"startup_s", field(s.startup_s)}};
}

void write_qoe_row(std::ostream& out, const SampleResult& s, const metrics::QoeReport& q) {
  out << s.index << ',' << s.seed << ',' << metrics::to_string(q.media) << ',' << q.switches << ','
      << num(q.avg_bitrate_bps) << ',' << num(q.avg_throughput_bps) << ',' << num(q.avg_buffer_s)
      << ',' << num(q.avg_app_rtt_s) << ',' << num(q.avg_app_jitter_s) << ',' << q.stalls << ','
      << num(q.startup_s) << '\n';
}

}  // namespace

bool RunReport::ok() const {
  return std::all_of(samples.begin(), samples.end(),
                     [](const SampleResult& s) { return s.ok && s.conserved; });
}

SampleResult run_sample(const ScenarioConfig& config, std::uint32_t index) {
  SampleResult r;
  r.index = index;
  r.seed = config.run.seed + index;
  try {
    run_into(config, r);
  } catch (const std::exception& e) {
    r.ok = false;
    r.error = e.what();
  }
  if (r.ok && !r.conserved) {
    r.ok = false;
    r.error = "conservation check failed";
  }
  return r;
}

RunReport run_experiment(const ScenarioConfig& config, unsigned workers) {
  RunReport report;
  report.config = config;
  report.digest = scenario_digest(config);
  const std::uint32_t n = config.run.samples;
  report.samples.resize(n);
  workers = std::max(1u, std::min<unsigned>(workers, n));
  if (workers == 1) {
    for (std::uint32_t i = 0; i < n; ++i) report.samples[i] = run_sample(config, i);
    return report;
  }
  std::atomic<std::uint32_t> next{0};
  std::vector<std::thread> pool;
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::uint32_t i = next++; i < n; i = next++) report.samples[i] = run_sample(config, i);
    });
  }
  for (auto& t : pool) t.join();
  return report;
}

void write_outputs(const RunReport& report, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  const auto& cfg = report.config;

  {
    std::ofstream out(dir / "scenario_effective.json");
    out << canonical_json(cfg) << '\n';
  }

  std::vector<metrics::QoeReport> video;
  std::vector<metrics::QoeReport> audio;
  {
    std::ofstream out(dir / "qoe_samples.csv");
    out << kQoeCsvHeader << '\n';
    for (const auto& s : report.samples) {
      if (s.video) {
        write_qoe_row(out, s, *s.video);
        if (s.ok) video.push_back(*s.video);
      }
      if (s.audio) {
        write_qoe_row(out, s, *s.audio);
        if (s.ok) audio.push_back(*s.audio);
      }
    }
  }

  {
    // Mean over successful samples, aligned by sample slot.
    std::ofstream out(dir / "delay_series.csv");
    out << kDelayCsvHeader << '\n';
    std::vector<const SampleResult*> good;
    for (const auto& s : report.samples) {
      if (s.ok) good.push_back(&s);
    }
    if (!good.empty()) {
      for (std::size_t i = 0; i < good.front()->delay.size(); ++i) {
        std::size_t len = good.front()->delay[i].samples.size();
        for (const auto* s : good) len = std::min(len, s->delay[i].samples.size());
        for (std::size_t k = 0; k < len; ++k) {
          double q = 0, p = 0, b = 0, d = 0;
          for (const auto* s : good) {
            const auto& x = s->delay[i].samples[k];
            q += x.avg_qdelay_s;
            p += x.drop_prob;
            b += static_cast<double>(x.backlog_bytes);
            d += static_cast<double>(x.drops_cum);
          }
          const double m = static_cast<double>(good.size());
          out << num(good.front()->delay[i].samples[k].time_s) << ','
              << good.front()->delay[i].iface << ',' << num(1e3 * q / m) << ',' << num(p / m)
              << ',' << num(b / m) << ',' << num(d / m) << '\n';
        }
      }
    }
  }

  for (const auto& s : report.samples) {
    char name[64];
    std::snprintf(name, sizeof name, "delay_series_sample_%03u.csv", s.index);
    std::ofstream out(dir / name);
    out << kDelayCsvHeader << '\n';
    for (const auto& series : s.delay) {
      for (const auto& x : series.samples) {
        out << num(x.time_s) << ',' << series.iface << ',' << num(1e3 * x.avg_qdelay_s) << ','
            << num(x.drop_prob) << ',' << x.backlog_bytes << ',' << x.drops_cum << '\n';
      }
    }
  }

  nlohmann::json j;
  j["scenario"] = cfg.name;
  j["digest"] = report.digest;
  j["qdisc"] = std::string(topology::to_string(cfg.aqm.kind));
  j["target_s"] = cfg.aqm.pie.target_s;
  j["samples"] = report.samples.size();
  j["ok"] = report.ok();
  if (!video.empty()) j["video"] = qoe_summary(metrics::aggregate(video), video);
  if (!audio.empty()) j["audio"] = qoe_summary(metrics::aggregate(audio), audio);
  auto& per = j["per_sample"] = nlohmann::json::array();
  for (const auto& s : report.samples) {
    nlohmann::json e;
    e["sample"] = s.index;
    e["seed"] = s.seed;
    e["ok"] = s.ok;
    if (!s.ok) e["error"] = s.error;
    e["conserved"] = s.conserved;
    if (!s.conservation_errors.empty()) e["conservation_errors"] = s.conservation_errors;
    e["dash_aborted"] = s.dash_aborted;
    if (s.video) {
      e["video_segments"] = s.video->segments;
      e["video_stall_s"] = s.video_stall_s;
    }
    if (s.audio) {
      e["audio_segments"] = s.audio->segments;
      e["audio_stall_s"] = s.audio_stall_s;
    }
    auto& q = e["aqm_interfaces"] = nlohmann::json::object();
    for (const auto& ir : s.interfaces) {
      if (std::find(cfg.aqm_interfaces.begin(), cfg.aqm_interfaces.end(), ir.iface) ==
          cfg.aqm_interfaces.end()) {
        continue;
      }
      q[ir.iface] = {{"mean_qdelay_after_warmup_s", ir.mean_qdelay_after_warmup_s},
                     {"max_qdelay_s", ir.max_qdelay_s},
                     {"enqueued", ir.final_stats.enqueued},
                     {"dequeued", ir.final_stats.dequeued},
                     {"dropped", ir.final_stats.dropped},
                     {"early_drops", ir.final_stats.early_drops},
                     {"forced_drops", ir.final_stats.forced_drops},
                     {"overflow_drops", ir.final_stats.overflow_drops}};
    }
    auto& flows = e["flows"] = nlohmann::json::array();
    for (const auto& f : s.flows) flows.push_back({{"flow", f.label}, {"window_bps", f.window_bps}});
    e["flow_jain"] = s.flow_jain;
    e["http"] = {{"issued", s.http_issued},
                 {"completed", s.http_completed},
                 {"incomplete", s.http_incomplete}};
    e["voip"] = {{"sent", s.voip_sent},
                 {"received", s.voip_received},
                 {"mean_delay_s", s.voip_mean_delay_s}};
    e["packets"] = {{"injected", s.counters.injected},
                    {"delivered", s.counters.delivered},
                    {"dropped", s.counters.dropped},
                    {"unclaimed", s.counters.unclaimed}};
    e["events"] = s.events_executed;
    per.push_back(std::move(e));
  }
  std::ofstream out(dir / "summary.json");
  out << j.dump(2) << '\n';
}

}  // namespace aqmsim::cli
