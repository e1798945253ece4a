#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "aqmsim/engine/simulator.hpp"
#include "aqmsim/metrics/qoe.hpp"
#include "aqmsim/transport/connection.hpp"

namespace aqmsim::apps {

using engine::Time;
using metrics::MediaType;

struct Representation {
  double bitrate_bps = 0;
  std::string label;  // resolution, e.g. "1280x720"
};

/// Abstract DASH manifest: durations plus the two bitrate ladders.
struct Manifest {
  double segment_duration_s = 4.0;
  double total_duration_s = 184.0;
  std::vector<Representation> video;
  std::vector<Representation> audio;

  std::uint32_t segment_count() const;
  const std::vector<Representation>& ladder(MediaType m) const {
    return m == MediaType::Video ? video : audio;
  }
  /// Throws ConfigError unless durations are positive and both ladders are
  /// non-empty, strictly ascending by bitrate.
  void validate() const;
};

/// The 15-rung AV1 ladder and single 128 kbit/s AAC track of the evaluation
/// content (184 s, 4 s segments).
Manifest default_manifest();

/// bitrate * duration / 8, rounded to the nearest byte.
std::uint64_t segment_bytes(double bitrate_bps, double segment_duration_s);

/// Rate-based ABR state: EWMA throughput estimate.
struct AbrState {
  double estimate_bps = 0;
  bool has_estimate = false;
  double safety_factor = 0.9;
  double ewma_weight = 0.25;
  std::size_t last_index = 0;
};

/// Folds one download into the estimate; the first sample initializes it.
/// Throws std::invalid_argument if download_time_s <= 0.
AbrState abr_update(AbrState state, std::uint64_t bytes, double download_time_s);

/// Highest rung with bitrate <= safety * estimate, else the lowest rung.
std::size_t abr_select(const AbrState& state, const std::vector<Representation>& ladder);

enum class PlaybackState { Buffering, Playing, Ended };

/// Client playback buffer for one media type, in seconds of media.
///
/// Playback drains one second of media per simulated second.  Time is split
/// into startup (buffering before the first play), playing and stalled
/// (buffering after the first play).
class PlaybackBuffer {
 public:
  PlaybackBuffer(double capacity_s, double resume_threshold_s, Time start);

  /// Brings the buffer forward to `now`, handling an underrun on the way.
  void advance(Time now);
  /// Adds one downloaded segment at `now` (advances first).
  void add(double media_s, Time now);
  /// All segments are downloaded; the next underrun ends the session.
  void set_downloads_complete() { downloads_complete_ = true; }

  /// Level at `now` without mutating state.
  double level_at(Time now) const;
  double level() const { return level_; }
  PlaybackState state() const { return state_; }
  double capacity() const { return capacity_; }
  double resume_threshold() const { return resume_; }

  std::uint64_t stalls() const { return stalls_; }
  double startup_s() const { return startup_s_; }
  double stall_s() const { return stall_s_; }
  double playing_s() const { return playing_s_; }
  Time start() const { return start_; }
  std::optional<Time> ended_at() const { return ended_at_; }
  /// When the level will reach zero if nothing is added (only while playing).
  std::optional<Time> underrun_time() const;

 private:
  void account_idle(double dt);

  double capacity_;
  double resume_;
  Time start_;
  Time last_;
  double level_ = 0;
  PlaybackState state_ = PlaybackState::Buffering;
  bool ever_played_ = false;
  bool downloads_complete_ = false;
  std::uint64_t stalls_ = 0;
  double startup_s_ = 0;
  double stall_s_ = 0;
  double playing_s_ = 0;
  std::optional<Time> ended_at_;
};

/// Maps segment requests to response sizes.
class DashServer {
 public:
  explicit DashServer(Manifest manifest) : manifest_(std::move(manifest)) {}
  std::uint64_t response_bytes(MediaType m, std::size_t rep) const {
    return segment_bytes(manifest_.ladder(m).at(rep).bitrate_bps, manifest_.segment_duration_s);
  }
  const Manifest& manifest() const { return manifest_; }

 private:
  Manifest manifest_;
};

struct DashConfig {
  Manifest manifest = default_manifest();
  double max_buffer_s = 10.0;
  double resume_threshold_s = 1.0;
  double abr_safety = 0.9;
  double abr_ewma_weight = 0.25;
  std::uint32_t request_bytes = 200;
};

/// Adaptive streaming client: audio and video each keep their own buffer and
/// fetch segments one at a time over the shared connection.
class DashClient {
 public:
  struct Session {
    Session(MediaType m, PlaybackBuffer b) : media(m), buffer(std::move(b)) {}

    MediaType media = MediaType::Video;
    AbrState abr;
    PlaybackBuffer buffer;
    std::uint32_t next_index = 0;
    bool outstanding = false;
    std::size_t current_rep = 0;
    Time request_time;
    std::vector<metrics::SegmentRecord> log;
    std::vector<metrics::BufferSample> samples;
    std::uint32_t requests = 0;
    engine::EventId wake = 0;
    bool wake_armed = false;
  };

  /// `conn`'s client side is the player; its server side serves `server`.
  DashClient(engine::Simulator& sim, transport::Connection& conn, const DashServer& server,
             DashConfig config);
  ~DashClient();
  DashClient(const DashClient&) = delete;
  DashClient& operator=(const DashClient&) = delete;

  /// Begins fetching at the current time.
  void start();
  /// Records the buffer level of both media types at the current time.
  void sample_buffers();
  /// Closes the accounting at the current time.
  void finalize();

  const Session& session(MediaType m) const { return m == MediaType::Video ? video_ : audio_; }
  bool aborted() const { return aborted_; }
  metrics::QoeReport report(MediaType m) const;

 private:
  void step(Session& s);
  void request_next(Session& s);
  void on_segment(Session& s, std::uint32_t index, std::size_t rep, Time elapsed);
  void rearm(Session& s);

  engine::Simulator& sim_;
  transport::Connection& conn_;
  const DashServer& server_;
  DashConfig config_;
  Session video_;
  Session audio_;
  bool aborted_ = false;
  bool started_ = false;
};

}  // namespace aqmsim::apps
