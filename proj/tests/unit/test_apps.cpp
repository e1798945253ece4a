#include <cmath>
#include <memory>
#include <vector>

#include "aqmsim/apps/dash.hpp"
#include "aqmsim/apps/traffic.hpp"
#include "aqmsim/topology/config_error.hpp"
#include "doctest.h"

using namespace aqmsim;
using namespace aqmsim::apps;
using engine::Simulator;
using topology::TopologySpec;

namespace {

TopologySpec pair_topology(double rate_bps, Time delay, topology::QdiscKind kind =
                                                             topology::QdiscKind::DropTail) {
  TopologySpec t;
  t.nodes = {"C", "R", "S"};
  t.links.push_back({"C", "R", 1e9, 1e9, Time::micros(100), Time::micros(100)});
  t.links.push_back({"R", "S", rate_bps, rate_bps, delay, delay});
  topology::QdiscSpec q;
  q.kind = kind;
  t.interface_qdiscs["R->S"] = q;
  t.interface_qdiscs["R->C"] = q;
  return t;
}

}  // namespace

TEST_CASE("segment sizes") {
  CHECK(segment_bytes(145e3, 4) == 72'500);
  CHECK(segment_bytes(1400e3, 4) == 700'000);
  CHECK(segment_bytes(128e3, 4) == 64'000);
}

TEST_CASE("default manifest") {
  Manifest m = default_manifest();
  CHECK(m.segment_count() == 46);
  REQUIRE(m.video.size() == 15);
  CHECK(m.video.front().bitrate_bps == 145e3);
  CHECK(m.video.back().bitrate_bps == 27500e3);
  REQUIRE(m.audio.size() == 1);
  CHECK(m.audio.front().bitrate_bps == 128e3);
  CHECK_NOTHROW(m.validate());
  Manifest bad = m;
  std::swap(bad.video[0], bad.video[1]);
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = m;
  bad.audio.clear();
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("throughput estimate") {
  AbrState s;
  s = abr_update(s, 700'000, 2.0);
  CHECK(s.estimate_bps == doctest::Approx(2.8e6));
  AbrState t;
  t.estimate_bps = 2e6;
  t.has_estimate = true;
  t = abr_update(t, 500'000, 1.0);  // 4 Mbit/s sample
  CHECK(t.estimate_bps == doctest::Approx(2.5e6));
  AbrState u;
  for (int i = 0; i < 200; ++i) u = abr_update(u, 250'000, 1.0);
  CHECK(u.estimate_bps == doctest::Approx(2e6));
  CHECK_THROWS_AS(abr_update(u, 1, 0.0), std::invalid_argument);
}

TEST_CASE("rung selection") {
  const auto ladder = default_manifest().video;
  AbrState s;
  s.has_estimate = true;
  s.estimate_bps = 1000e3;
  CHECK(ladder[abr_select(s, ladder)].bitrate_bps == 900e3);
  s.estimate_bps = 50e3;
  CHECK(abr_select(s, ladder) == 0);
  s.estimate_bps = 1e9;
  CHECK(abr_select(s, ladder) == ladder.size() - 1);
  CHECK(ladder[abr_select(s, ladder)].bitrate_bps == 27500e3);
}

TEST_CASE("playback buffer: stall and resume") {
  PlaybackBuffer b(10, 1, Time::zero());
  CHECK(b.state() == PlaybackState::Buffering);
  b.add(0.5, Time::millis(200));
  CHECK(b.state() == PlaybackState::Buffering);
  b.add(3.5, Time::millis(500));
  CHECK(b.state() == PlaybackState::Playing);
  CHECK(b.startup_s() == doctest::Approx(0.5));
  CHECK(b.underrun_time() == Time::millis(4500));
  b.advance(Time::seconds(6));
  CHECK(b.state() == PlaybackState::Buffering);
  CHECK(b.stalls() == 1);
  b.add(0.5, Time::seconds(7));
  CHECK(b.state() == PlaybackState::Buffering);
  b.add(0.5, Time::seconds(8));
  CHECK(b.state() == PlaybackState::Playing);
  CHECK(b.stall_s() == doctest::Approx(3.5));
  CHECK(b.playing_s() == doctest::Approx(4.0));
  b.set_downloads_complete();
  b.advance(Time::seconds(20));
  CHECK(b.state() == PlaybackState::Ended);
  CHECK(b.ended_at() == Time::seconds(9));
  CHECK(b.stalls() == 1);
  CHECK(b.startup_s() + b.stall_s() + b.playing_s() == doctest::Approx(9.0));
}

TEST_CASE("playback buffer capacity") {
  PlaybackBuffer b(10, 1, Time::zero());
  b.add(8, Time::zero());
  b.add(8, Time::zero());
  CHECK(b.level() == 10);
  CHECK(b.level_at(Time::seconds(3)) == doctest::Approx(7));
}

namespace {

struct DashRig {
  Simulator sim;
  topology::Network net;
  std::unique_ptr<transport::Connection> conn;
  DashServer server{default_manifest()};
  std::unique_ptr<DashClient> client;

  explicit DashRig(double rate_bps) : net(sim, 1, pair_topology(rate_bps, Time::millis(5))) {
    auto c = net.node("C"), s = net.node("S");
    conn = std::make_unique<transport::Connection>(net, c, s, 80,
                                                   std::vector{net.route_between(c, s)});
    conn->open();
    client = std::make_unique<DashClient>(sim, *conn, server, DashConfig{});
    client->start();
  }
};

}  // namespace

TEST_CASE("clean session fetches every segment once") {
  DashRig rig(1e9);
  double worst_gate = 0;
  std::uint32_t seen = 0;
  std::function<void()> poll = [&] {
    const auto& v = rig.client->session(MediaType::Video);
    if (v.requests != seen) {
      seen = v.requests;
      // A request only goes out when a whole segment fits in the buffer.
      if (seen > 3) worst_gate = std::max(worst_gate, v.buffer.level_at(rig.sim.now()));
    }
    rig.sim.schedule(Time::micros(100), poll);
  };
  rig.sim.schedule(Time::zero(), poll);
  rig.sim.run_until(Time::seconds(200));
  rig.client->finalize();
  const auto& v = rig.client->session(MediaType::Video);
  const auto& a = rig.client->session(MediaType::Audio);
  CHECK(v.requests == 46);
  CHECK(a.requests == 46);
  CHECK(v.log.size() == 46);
  CHECK(v.buffer.stalls() == 0);
  CHECK(worst_gate <= 6.0 + 1e-6);
  CHECK(v.buffer.state() == PlaybackState::Ended);
  // Startup + stalls + playback add up to the session's wall time.
  const double wall = (*v.buffer.ended_at() - v.buffer.start()).to_seconds();
  CHECK(v.buffer.startup_s() + v.buffer.stall_s() + v.buffer.playing_s() ==
        doctest::Approx(wall).epsilon(1e-9));
  CHECK(v.buffer.playing_s() == doctest::Approx(184.0));
  auto audio = rig.client->report(MediaType::Audio);
  CHECK(audio.switches == 0);
  CHECK(audio.avg_bitrate_bps == 128e3);
  auto video = rig.client->report(MediaType::Video);
  CHECK(video.stalls == 0);
  CHECK(video.segments == 46);
}

TEST_CASE("starved session stalls and still accounts for its time") {
  DashRig rig(0.25e6);
  rig.sim.run_until(Time::seconds(400));
  rig.client->finalize();
  const auto& v = rig.client->session(MediaType::Video);
  CHECK(v.log.size() == 46);
  CHECK(v.buffer.stalls() > 0);
  for (const auto& rec : v.log) CHECK(rec.bitrate_bps <= 250e3);
  REQUIRE(v.buffer.ended_at());
  const double wall = (*v.buffer.ended_at() - v.buffer.start()).to_seconds();
  CHECK(v.buffer.startup_s() + v.buffer.stall_s() + v.buffer.playing_s() ==
        doctest::Approx(wall).epsilon(1e-9));
}

TEST_CASE("voip call rate and concurrency") {
  Simulator sim;
  topology::Network net(sim, 1, pair_topology(100e6, Time::millis(5)));
  VoipGenerator gen(net, net.node("C"), net.node("S"), VoipConfig{}, Time::zero(),
                    Time::seconds(30), engine::RngStream(1, "voip"));
  sim.run_until(Time::seconds(25));
  CHECK(gen.active_calls() >= 95);
  CHECK(gen.active_calls() <= 101);
  sim.run_until(Time::seconds(45));
  CHECK(gen.active_calls() == 0);
  CHECK(gen.calls_started() == 300);
  // Calls are cut at the stop time: the last 10 s of calls lose 5 s each on
  // average, so about 300*1000 - 100*500 packets.
  CHECK(gen.packets_sent() == doctest::Approx(250'000).epsilon(0.01));
  CHECK(gen.packets_received() == gen.packets_sent());
}

TEST_CASE("single voip call sends 50 packets/s each way") {
  Simulator sim;
  topology::Network net(sim, 1, pair_topology(100e6, Time::millis(5)));
  VoipConfig cfg;
  cfg.calls_per_second = 0.01;  // one call in the window
  VoipGenerator gen(net, net.node("C"), net.node("S"), cfg, Time::zero(), Time::seconds(5),
                    engine::RngStream(1, "voip"));
  sim.run_until(Time::seconds(2));
  CHECK(gen.calls_started() == 1);
  CHECK(gen.packets_sent() >= 2 * 99);
  CHECK(gen.packets_sent() <= 2 * 101);
}

TEST_CASE("http request count") {
  Simulator sim;
  topology::Network net(sim, 1, pair_topology(100e6, Time::millis(5)));
  HttpConfig cfg;
  HttpGenerator gen(net, net.node("C"), net.node("S"), cfg, Time::zero());
  sim.run_until(Time::seconds(200));
  CHECK(gen.issued() == 2700);
  CHECK(gen.completed() == 2700);
  CHECK(gen.mean_completion_s() > 0.0);
}

TEST_CASE("single ftp flow saturates the bottleneck") {
  Simulator sim;
  topology::Network net(sim, 1, pair_topology(10e6, Time::millis(10), topology::QdiscKind::Pie));
  FtpSource ftp(net, net.node("C"), net.node("S"), Time::zero());
  sim.run_until(Time::seconds(5));
  const auto b5 = ftp.delivered_bytes();
  sim.run_until(Time::seconds(25));
  const double goodput = 8.0 * static_cast<double>(ftp.delivered_bytes() - b5) / 20.0;
  CHECK(goodput >= 0.9 * 10e6 * 1448.0 / 1500.0);
}

TEST_CASE("five ftp flows share an fq_pie bottleneck") {
  Simulator sim;
  topology::Network net(sim, 1,
                        pair_topology(10e6, Time::millis(10), topology::QdiscKind::FqPie));
  std::vector<std::unique_ptr<FtpSource>> flows;
  for (int i = 0; i < 5; ++i) {
    flows.push_back(std::make_unique<FtpSource>(net, net.node("C"), net.node("S"),
                                                Time::millis(100 * i)));
  }
  sim.run_until(Time::seconds(10));
  std::vector<std::uint64_t> at10;
  for (auto& f : flows) at10.push_back(f->delivered_bytes());
  sim.run_until(Time::seconds(30));
  std::vector<double> rates;
  double total = 0;
  for (std::size_t i = 0; i < flows.size(); ++i) {
    rates.push_back(8.0 * static_cast<double>(flows[i]->delivered_bytes() - at10[i]) / 20.0);
    total += rates.back();
  }
  CHECK(total >= 0.9 * 10e6 * 1448.0 / 1500.0);
  const double share = total / 5;
  for (double r : rates) CHECK(std::abs(r - share) <= 0.1 * share);
}

TEST_CASE("cbr source paces packets") {
  Simulator sim;
  topology::Network net(sim, 1, pair_topology(100e6, Time::millis(5)));
  CbrSource cbr(net, net.node("C"), net.node("S"), 1.2e6, 1500, Time::zero());
  sim.run_until(Time::seconds(10));
  CHECK(cbr.sent_bytes() == doctest::Approx(1.2e6 * 10 / 8).epsilon(0.01));
  CHECK(cbr.received_bytes() <= cbr.sent_bytes());
}
