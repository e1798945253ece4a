// End-to-end acceptance checks.  Prints one PASS/FAIL line per criterion and
// exits non-zero if any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "aqmsim/apps/traffic.hpp"
#include "aqmsim/cli/runner.hpp"
#include "aqmsim/cli/scenario.hpp"
#include "aqmsim/metrics/qoe.hpp"
#include "aqmsim/qdisc/pie.hpp"
#include "aqmsim/topology/network.hpp"
#include "aqmsim/transport/cubic.hpp"

using namespace aqmsim;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;
using engine::Time;

namespace {

// Tolerances and limits.
constexpr double kPieBandLo = 0.5, kPieBandHi = 2.0;
constexpr double kFqBandLo = 1.0, kFqBandHi = 4.0;
constexpr double kThroughputRatio = 1.3;
constexpr double kJainMin = 0.99;
constexpr double kPieTol = 1e-12;
constexpr double kCubicRelTol = 1e-9;
constexpr double kCubicW0RelTol = 1e-12;
constexpr double kAudioBitrate = 128e3;
constexpr int kTopRungWithin = 5;
constexpr double kC1SecondsPerTarget = 30, kC2Seconds = 30, kC3Seconds = 300, kC6Seconds = 10;
constexpr std::uint32_t kC3Samples = 5;

const std::string kDir = AQMSIM_SCENARIO_DIR;

struct Outcome {
  int id;
  bool pass;
  std::string detail;
};
std::vector<Outcome> outcomes;

void report(int id, bool pass, const std::string& detail) {
  outcomes.push_back({id, pass, detail});
  std::printf("%s criterion %d: %s\n", pass ? "PASS" : "FAIL", id, detail.c_str());
  std::fflush(stdout);
}

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

cli::ScenarioConfig with(cli::ScenarioConfig c, topology::QdiscKind kind, double target_ms,
                         std::uint32_t samples) {
  cli::Overrides o;
  o.qdisc = kind;
  o.target_ms = target_ms;
  o.samples = samples;
  return cli::apply_overrides(std::move(c), o);
}

// Conservation failures seen by any run in this binary (criterion 10).
std::vector<std::string> conservation_failures;
int runs_checked = 0;

void note_conservation(const cli::ScenarioConfig& c, const cli::SampleResult& s) {
  ++runs_checked;
  if (!s.ok) {
    conservation_failures.push_back(c.name + "#" + std::to_string(s.index) + ": " + s.error);
    return;
  }
  for (const auto& e : s.conservation_errors) {
    conservation_failures.push_back(c.name + "#" + std::to_string(s.index) + ": " + e);
  }
  if (!s.conserved && s.conservation_errors.empty()) {
    conservation_failures.push_back(c.name + "#" + std::to_string(s.index));
  }
}

cli::RunReport run(const cli::ScenarioConfig& c) {
  auto r = cli::run_experiment(c, 1);
  for (const auto& s : r.samples) note_conservation(c, s);
  return r;
}

double bottleneck_delay(const cli::SampleResult& s, const std::string& iface) {
  for (const auto& i : s.interfaces) {
    if (i.iface == iface) return i.mean_qdelay_after_warmup_s;
  }
  return -1;
}

// 1 and 2 ----------------------------------------------------------------

double c1_pie_delay_5ms = -1;

void criterion1() {
  const auto base = cli::load_scenario(kDir + "/dumbbell-ftp.yaml");
  const std::string iface = base.aqm_interfaces.front();
  bool ok = true;
  std::string detail;
  for (double t : {5.0, 10.0, 15.0}) {
    const auto t0 = Clock::now();
    auto r = run(with(base, topology::QdiscKind::Pie, t, 1));
    const double secs = seconds_since(t0);
    const double d = r.samples.front().ok ? bottleneck_delay(r.samples.front(), iface) : -1;
    if (t == 5.0) c1_pie_delay_5ms = d;
    const double tgt = t / 1000;
    const bool in_band = d >= kPieBandLo * tgt && d <= kPieBandHi * tgt;
    ok = ok && in_band && secs < kC1SecondsPerTarget;
    detail += fmt("target %.0f ms", t) + fmt(" -> %.2f ms", d * 1000) + fmt(" (%.1f s); ", secs);
  }
  report(1, ok, detail + fmt("band [%.1fx, ", kPieBandLo) + fmt("%.1fx] target", kPieBandHi));
}

void criterion2() {
  const auto base = cli::load_scenario(kDir + "/dumbbell-ftp.yaml");
  const std::string iface = base.aqm_interfaces.front();
  const auto t0 = Clock::now();
  auto r = run(with(base, topology::QdiscKind::FqPie, 5, 1));
  const double secs = seconds_since(t0);
  const double d = r.samples.front().ok ? bottleneck_delay(r.samples.front(), iface) : -1;
  const bool ok = d >= kFqBandLo * 0.005 && d <= kFqBandHi * 0.005 && d > c1_pie_delay_5ms &&
                  secs < kC2Seconds;
  report(2, ok,
         fmt("fq_pie mean active-queue delay %.2f ms", d * 1000) +
             fmt(" vs pie %.2f ms at 5 ms target", c1_pie_delay_5ms * 1000) +
             fmt(", band [5, 20] ms (%.1f s)", secs));
}

// 3, 4 and 5 --------------------------------------------------------------

void criteria3to5() {
  const auto base = cli::load_scenario(kDir + "/paper-default.yaml");
  const auto t0 = Clock::now();
  struct Cell {
    double throughput = 0, bitrate = 0, switches_median = 0;
  };
  std::map<std::pair<int, double>, Cell> cells;
  bool audio_ok = true;
  std::string audio_detail;
  int runs = 0;
  for (double t : {5.0, 10.0, 15.0}) {
    for (auto kind : {topology::QdiscKind::Pie, topology::QdiscKind::FqPie}) {
      auto r = run(with(base, kind, t, kC3Samples));
      std::vector<double> thr, br, sw;
      for (const auto& s : r.samples) {
        ++runs;
        if (!s.ok || !s.video || !s.audio) {
          audio_ok = false;
          audio_detail = "run failed: " + s.error;
          continue;
        }
        thr.push_back(s.video->avg_throughput_bps);
        br.push_back(s.video->avg_bitrate_bps);
        sw.push_back(static_cast<double>(s.video->switches));
        if (s.audio->switches != 0 || s.audio->avg_bitrate_bps != kAudioBitrate) {
          audio_ok = false;
          audio_detail = fmt("audio switches %.0f", static_cast<double>(s.audio->switches)) +
                         fmt(", bitrate %.1f", s.audio->avg_bitrate_bps);
        }
      }
      Cell& c = cells[{static_cast<int>(kind), t}];
      c.throughput = metrics::mean(thr);
      c.bitrate = metrics::mean(br);
      c.switches_median = metrics::median(sw);
    }
  }
  const double secs = seconds_since(t0);

  bool ok3 = secs < kC3Seconds, ok4 = true;
  std::string d3, d4;
  for (double t : {5.0, 10.0, 15.0}) {
    const Cell& p = cells[{static_cast<int>(topology::QdiscKind::Pie), t}];
    const Cell& f = cells[{static_cast<int>(topology::QdiscKind::FqPie), t}];
    const double ratio = p.throughput > 0 ? f.throughput / p.throughput : 0;
    ok3 = ok3 && ratio >= kThroughputRatio;
    d3 += fmt("%.0f ms: ", t) + fmt("fq_pie %.0f", f.throughput / 1e3) +
          fmt(" / pie %.0f kbit/s", p.throughput / 1e3) + fmt(" = %.2f; ", ratio);
    ok4 = ok4 && f.switches_median <= p.switches_median && f.bitrate >= p.bitrate;
    d4 += fmt("%.0f ms: ", t) + fmt("switches %.1f", f.switches_median) +
          fmt(" vs %.1f, ", p.switches_median) + fmt("bitrate %.0f", f.bitrate / 1e3) +
          fmt(" vs %.0f kbit/s; ", p.bitrate / 1e3);
  }
  report(3, ok3,
         d3 + fmt("need >= %.2f", kThroughputRatio) + fmt(", %.0f runs", runs) +
             fmt(" in %.0f s", secs));
  report(4, ok4, d4 + "(fq_pie vs pie)");
  report(5, audio_ok,
         audio_ok ? fmt("%.0f runs: audio 0 switches, 128 kbit/s", runs) : audio_detail);
}

// 6 -----------------------------------------------------------------------

void criterion6() {
  const auto cfg = cli::load_scenario(kDir + "/fairness-cbr.yaml");
  const auto t0 = Clock::now();
  auto r = run(cfg);
  const double secs = seconds_since(t0);
  const auto& s = r.samples.front();
  std::size_t flows = s.flows.size();
  const bool ok = s.ok && flows == 8 && s.flow_jain >= kJainMin && secs < kC6Seconds;
  report(6, ok,
         fmt("%.0f flows, ", static_cast<double>(flows)) + fmt("Jain %.5f", s.flow_jain) +
             fmt(" over the last %.0f s", cfg.run.fairness_window_s) + fmt(" (%.1f s)", secs));
}

// 7 -----------------------------------------------------------------------

void criterion7() {
  struct V {
    double p, qdelay, qdelay_old, target, burst, expected_p;
  };
  // Traced by hand through the RFC 8033 update pseudocode and re-checked with
  // exact rational arithmetic (tests/oracles/pie_oracle.py).
  const V vectors[] = {
      {0.05, 0.03, 0.02, 0.015, 0, 0.0571875},
      {0.5, 0, 0, 0.015, 0, 0.4881625},
      {0.2, 0.015, 0.015, 0.015, 0.15, 0.2},
      {0.0, 0.02, 0.005, 0.005, 0.15, 1.007080078125e-05},
      {5e-07, 0.012, 0.01, 0.01, 0.01, 1.8427734375e-06},
      {5e-06, 0.025, 0.018, 0.01, 0, 2.5751953125e-05},
      {5e-05, 0.003, 0.008, 0.005, 0, 0},
      {0.0005, 0.04, 0.04, 0.015, 0, 0.00059765625},
      {0.005, 0.009, 0.002, 0.005, 0, 0.00615625},
      {0.3, 0.05, 0.01, 0.015, 0, 0.354375},
      {0.99, 0.2, 0.1, 0.005, 0, 1.0},
      {0.01, 0, 0.004, 0.005, 0, 0.0071875},
      {0.1, 0.001, 0.03, 0.015, 0, 0.062},
      {0.5, 0, 0, 0.0, 0, 0.49},
  };
  double worst = 0;
  int n = 0;
  for (const auto& v : vectors) {
    qdisc::PieParams params;
    params.target_s = v.target;
    const auto out = qdisc::pie_update({v.p, v.qdelay, v.qdelay_old, v.burst}, params);
    worst = std::max(worst, std::abs(out.drop_prob - v.expected_p));
    ++n;
  }
  // The worked example's increment on its own.
  qdisc::PieParams params;
  const double inc = qdisc::pie_increment({0.05, 0.030, 0.020, 0}, params);
  worst = std::max(worst, std::abs(inc - 0.0071875));
  report(7, worst <= kPieTol,
         fmt("%.0f vectors + worked increment, ", n) + fmt("max |error| %.3g", worst));
}

// 8 -----------------------------------------------------------------------

void criterion8() {
  const double mss = 1448;
  double worst = 0;
  bool exact_k = true;
  double worst_w0 = 0;
  int n = 0;
  for (double wmax : {10.0, 37.5, 100.0, 1000.0}) {
    // Independent evaluation in long double.
    const long double k = std::cbrt(static_cast<long double>(wmax) * 0.3L / 0.4L);
    for (int i = 0; i < 25; ++i) {
      const double t = 0.37 * i;
      const long double d = static_cast<long double>(t) - k;
      long double expect = (0.4L * d * d * d + wmax) * mss;
      expect = std::max(expect, 2.0L * mss);
      const double got = transport::cubic_window(t, wmax * mss, mss);
      worst = std::max(worst, static_cast<double>(std::fabs((got - expect) / expect)));
      ++n;
    }
    const double at_k = transport::cubic_window(transport::cubic_k(wmax), wmax * mss, mss);
    exact_k = exact_k && at_k == wmax * mss;
    const double w0 = transport::cubic_window(0, wmax * mss, mss);
    worst_w0 = std::max(worst_w0, std::abs(w0 - 0.7 * wmax * mss) / (0.7 * wmax * mss));
  }
  report(8, worst <= kCubicRelTol && exact_k && worst_w0 <= kCubicW0RelTol,
         fmt("%.0f samples, ", n) + fmt("max rel error %.3g; ", worst) +
             (exact_k ? "W(K) == Wmax exactly; " : "W(K) != Wmax; ") +
             fmt("W(0)/0.7Wmax rel error %.3g", worst_w0));
}

// 9 -----------------------------------------------------------------------

struct Trace {
  std::vector<std::uint64_t> drops;
  std::vector<std::pair<std::int64_t, std::uint64_t>> departures;  // (ns, uid)
  std::uint64_t delivered = 0;
};

Trace single_flow(topology::QdiscKind kind) {
  topology::TopologySpec t;
  t.nodes = {"A", "L", "R", "B"};
  t.links.push_back({"A", "L", 100e6, 100e6, Time::millis(1), Time::millis(1)});
  t.links.push_back({"L", "R", 10e6, 10e6, Time::millis(10), Time::millis(10)});
  t.links.push_back({"R", "B", 100e6, 100e6, Time::millis(1), Time::millis(1)});
  topology::QdiscSpec q;
  q.kind = kind;
  q.pie.target_s = 0.005;
  q.fq_pie.pie = q.pie;
  t.interface_qdiscs["L->R"] = q;

  engine::Simulator sim;
  topology::Network net(sim, 1234, t);
  const auto iface = *net.find_interface("L->R");
  Trace tr;
  net.interface(iface).qdisc->set_drop_hook([&](const qdisc::Packet& p) { tr.drops.push_back(p.uid); });
  net.set_tx_observer([&](topology::InterfaceIndex i, const qdisc::Packet& p) {
    if (i == iface) tr.departures.emplace_back(sim.now().ns(), p.uid);
  });
  apps::FtpSource ftp(net, net.node("A"), net.node("B"), Time::zero());
  sim.run_until(Time::seconds(20));
  tr.delivered = ftp.delivered_bytes();
  return tr;
}

void criterion9() {
  const Trace pie = single_flow(topology::QdiscKind::Pie);
  const Trace fq = single_flow(topology::QdiscKind::FqPie);
  const bool ok = !pie.drops.empty() && pie.drops == fq.drops && pie.departures == fq.departures;
  report(9, ok,
         fmt("pie %.0f drops / ", static_cast<double>(pie.drops.size())) +
             fmt("%.0f departures, ", static_cast<double>(pie.departures.size())) +
             fmt("fq_pie %.0f drops / ", static_cast<double>(fq.drops.size())) +
             fmt("%.0f departures", static_cast<double>(fq.departures.size())) +
             (ok ? ", identical" : ", sequences differ"));
}

// 10 ----------------------------------------------------------------------

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

bool same_outputs(const fs::path& a, const fs::path& b) {
  std::vector<std::string> names;
  for (const auto& e : fs::directory_iterator(a)) names.push_back(e.path().filename().string());
  std::size_t nb = 0;
  for ([[maybe_unused]] const auto& e : fs::directory_iterator(b)) ++nb;
  if (names.size() != nb || names.empty()) return false;
  for (const auto& n : names) {
    if (slurp(a / n) != slurp(b / n)) return false;
  }
  return true;
}

void criterion10() {
  const fs::path tmp = fs::temp_directory_path() / "aqmsim_acceptance";
  fs::remove_all(tmp);
  bool identical = true;
  int scenarios = 0;
  for (const auto& e : fs::directory_iterator(kDir)) {
    if (e.path().extension() != ".yaml") continue;
    auto cfg = cli::load_scenario(e.path().string());
    // Short repeated runs keep this affordable; two samples exercise seeding.
    cli::Overrides o;
    o.horizon_s = std::min(cfg.run.horizon_s, 20.0);
    o.samples = 2;
    cfg = cli::apply_overrides(cfg, o);
    for (auto kind : {topology::QdiscKind::Pie, topology::QdiscKind::FqPie}) {
      cli::Overrides k;
      k.qdisc = kind;
      const auto c = cli::apply_overrides(cfg, k);
      const auto name = c.name + "_" + std::string(topology::to_string(kind));
      cli::write_outputs(run(c), tmp / (name + "_a"));
      cli::write_outputs(run(c), tmp / (name + "_b"));
      identical = identical && same_outputs(tmp / (name + "_a"), tmp / (name + "_b"));
      ++scenarios;
    }
  }
  fs::remove_all(tmp);
  const bool ok = identical && conservation_failures.empty() && scenarios > 0;
  std::string detail = fmt("%.0f runs conserved", runs_checked - static_cast<double>(conservation_failures.size())) +
                       fmt(" of %.0f", runs_checked) +
                       fmt("; %.0f scenario/qdisc pairs re-run ", scenarios) +
                       (identical ? "byte-identical" : "with differing output");
  if (!conservation_failures.empty()) detail += "; first failure: " + conservation_failures.front();
  report(10, ok, detail);
}

// 11 ----------------------------------------------------------------------

void criterion11() {
  const auto cfg = cli::load_scenario(kDir + "/dash-clean.yaml");
  auto sample = cli::run_sample(cfg, 0);
  note_conservation(cfg, sample);
  if (!sample.ok || !sample.video || !sample.audio) {
    report(11, false, "run failed: " + sample.error);
    return;
  }
  // The runner's report does not keep the per-segment log, so rerun the
  // session directly for the rung trajectory.
  engine::Simulator sim;
  topology::Network net(sim, cfg.run.seed, cfg.topology);
  std::vector<topology::RouteId> routes;
  for (const auto& p : cfg.dash->paths) routes.push_back(net.reverse(net.named_route(p)));
  transport::Connection conn(net, net.node(cfg.dash->client), net.node(cfg.dash->server), 80,
                             routes);
  conn.open();
  apps::DashServer server(cfg.dash->config.manifest);
  apps::DashClient client(sim, conn, server, cfg.dash->config);
  client.start();
  sim.run_until(Time::seconds(cfg.run.horizon_s));
  client.finalize();
  const auto& video = client.session(metrics::MediaType::Video);
  const auto& audio = client.session(metrics::MediaType::Audio);
  const double top = cfg.dash->config.manifest.video.back().bitrate_bps;
  int first_top = -1;
  for (std::size_t i = 0; i < video.log.size(); ++i) {
    if (video.log[i].bitrate_bps == top) {
      first_top = static_cast<int>(i);
      break;
    }
  }
  const auto expected = cfg.dash->config.manifest.segment_count();
  const bool ok = expected == 46 && video.log.size() == expected && audio.log.size() == expected &&
                  video.requests == expected && audio.requests == expected &&
                  sample.video->stalls == 0 && sample.audio->stalls == 0 &&
                  sample.video->segments == expected && first_top >= 0 &&
                  first_top < kTopRungWithin;
  report(11, ok,
         fmt("video %.0f", static_cast<double>(video.log.size())) +
             fmt(" / audio %.0f segments, ", static_cast<double>(audio.log.size())) +
             fmt("stalls %.0f, ", static_cast<double>(sample.video->stalls + sample.audio->stalls)) +
             fmt("top rung first at segment %.0f", first_top + 1.0));
}

}  // namespace

int main(int argc, char** argv) {
  // Optional list of criteria to run, e.g. "acceptance 1 2 9".
  std::vector<int> only;
  for (int i = 1; i < argc; ++i) only.push_back(std::atoi(argv[i]));
  auto want = [&](int id) { return only.empty() || std::count(only.begin(), only.end(), id); };

  const std::vector<std::pair<int, std::function<void()>>> steps = {
      {1, criterion1}, {2, criterion2}, {3, criteria3to5}, {6, criterion6},  {7, criterion7},
      {8, criterion8}, {9, criterion9}, {11, criterion11}, {10, criterion10},
  };
  for (const auto& [id, fn] : steps) {
    const bool run_it = id == 3 ? (want(3) || want(4) || want(5)) : want(id);
    if (!run_it) continue;
    try {
      fn();
    } catch (const std::exception& e) {
      report(id, false, std::string("exception: ") + e.what());
    }
  }
  const auto failed = std::count_if(outcomes.begin(), outcomes.end(),
                                    [](const Outcome& o) { return !o.pass; });
  std::printf("%zu criteria checked, %ld failed\n", outcomes.size(), static_cast<long>(failed));
  return failed ? 1 : 0;
}
