#include "aqmsim/apps/dash.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "aqmsim/topology/config_error.hpp"

namespace aqmsim::apps {
namespace {
constexpr double kEps = 1e-7;
}

std::uint32_t Manifest::segment_count() const {
  return static_cast<std::uint32_t>(std::ceil(total_duration_s / segment_duration_s - 1e-9));
}

void Manifest::validate() const {
  if (!(segment_duration_s > 0) || !(total_duration_s > 0)) {
    throw ConfigError("durations must be positive", "dash.manifest");
  }
  for (const auto* ladder : {&video, &audio}) {
    if (ladder->empty()) throw ConfigError("empty representation ladder", "dash.manifest");
    for (std::size_t i = 0; i < ladder->size(); ++i) {
      if (!((*ladder)[i].bitrate_bps > 0)) {
        throw ConfigError("bitrates must be positive", "dash.manifest");
      }
      if (i > 0 && !((*ladder)[i].bitrate_bps > (*ladder)[i - 1].bitrate_bps)) {
        throw ConfigError("ladder must be strictly ascending", "dash.manifest");
      }
    }
  }
}

Manifest default_manifest() {
  Manifest m;
  m.segment_duration_s = 4.0;
  m.total_duration_s = 184.0;
  const std::pair<double, const char*> rungs[] = {
      {145e3, "320x180"},    {180e3, "384x216"},    {350e3, "512x288"},    {500e3, "640x360"},
      {700e3, "768x432"},    {900e3, "1024x576"},   {1400e3, "1280x720"},  {2750e3, "1920x1080"},
      {5500e3, "1920x1080"}, {7000e3, "2560x1440"}, {11000e3, "3840x2160"}, {15000e3, "3840x2160"},
      {20000e3, "5120x2880"}, {22500e3, "7680x4320"}, {27500e3, "7680x4320"}};
  for (const auto& [bps, res] : rungs) m.video.push_back({bps, res});
  m.audio.push_back({128e3, "aac"});
  return m;
}

std::uint64_t segment_bytes(double bitrate_bps, double segment_duration_s) {
  return static_cast<std::uint64_t>(std::llround(bitrate_bps * segment_duration_s / 8.0));
}

AbrState abr_update(AbrState state, std::uint64_t bytes, double download_time_s) {
  if (!(download_time_s > 0)) throw std::invalid_argument("abr_update: download time must be positive");
  const double sample = 8.0 * static_cast<double>(bytes) / download_time_s;
  if (!state.has_estimate) {
    state.estimate_bps = sample;
    state.has_estimate = true;
  } else {
    state.estimate_bps = (1.0 - state.ewma_weight) * state.estimate_bps + state.ewma_weight * sample;
  }
  return state;
}

std::size_t abr_select(const AbrState& state, const std::vector<Representation>& ladder) {
  if (ladder.empty()) throw std::invalid_argument("abr_select: empty ladder");
  const double budget = state.safety_factor * state.estimate_bps;
  std::size_t pick = 0;
  for (std::size_t i = 0; i < ladder.size(); ++i) {
    if (ladder[i].bitrate_bps <= budget) pick = i;
  }
  return pick;
}

PlaybackBuffer::PlaybackBuffer(double capacity_s, double resume_threshold_s, Time start)
    : capacity_(capacity_s), resume_(resume_threshold_s), start_(start), last_(start) {}

void PlaybackBuffer::account_idle(double dt) {
  if (ever_played_) {
    stall_s_ += dt;
  } else {
    startup_s_ += dt;
  }
}

void PlaybackBuffer::advance(Time now) {
  if (state_ == PlaybackState::Ended || now <= last_) return;
  const double dt = (now - last_).to_seconds();
  last_ = now;
  if (state_ == PlaybackState::Buffering) {
    account_idle(dt);
    return;
  }
  if (dt < level_ - kEps) {
    level_ -= dt;
    playing_s_ += dt;
    return;
  }
  // Underrun somewhere in (last, now].
  const double played = std::min(level_, dt);
  playing_s_ += played;
  const double rest = dt - played;
  level_ = 0;
  if (downloads_complete_) {
    state_ = PlaybackState::Ended;
    ended_at_ = now - Time::seconds(rest);
    return;
  }
  state_ = PlaybackState::Buffering;
  ++stalls_;
  stall_s_ += rest;
}

void PlaybackBuffer::add(double media_s, Time now) {
  advance(now);
  if (state_ == PlaybackState::Ended) return;
  level_ = std::min(capacity_, level_ + media_s);
  if (state_ == PlaybackState::Buffering &&
      (level_ >= resume_ - kEps || downloads_complete_)) {
    state_ = PlaybackState::Playing;
    ever_played_ = true;
  }
}

double PlaybackBuffer::level_at(Time now) const {
  if (state_ != PlaybackState::Playing || now <= last_) return level_;
  return std::max(0.0, level_ - (now - last_).to_seconds());
}

std::optional<Time> PlaybackBuffer::underrun_time() const {
  if (state_ != PlaybackState::Playing) return std::nullopt;
  return last_ + Time::seconds(level_);
}

namespace {

DashClient::Session make_session(MediaType m, const DashConfig& c, Time now) {
  DashClient::Session s(m, PlaybackBuffer(c.max_buffer_s, c.resume_threshold_s, now));
  s.abr.safety_factor = c.abr_safety;
  s.abr.ewma_weight = c.abr_ewma_weight;
  return s;
}

}  // namespace

DashClient::DashClient(engine::Simulator& sim, transport::Connection& conn,
                       const DashServer& server, DashConfig config)
    : sim_(sim),
      conn_(conn),
      server_(server),
      config_(std::move(config)),
      video_(make_session(MediaType::Video, config_, sim.now())),
      audio_(make_session(MediaType::Audio, config_, sim.now())) {
  config_.manifest.validate();
  conn_.on_abort([this](const std::string&) {
    aborted_ = true;
    for (Session* s : {&video_, &audio_}) {
      if (s->wake_armed) sim_.cancel(s->wake);
      s->wake_armed = false;
    }
  });
}

DashClient::~DashClient() {
  for (Session* s : {&video_, &audio_}) {
    if (s->wake_armed) sim_.cancel(s->wake);
  }
}

void DashClient::start() {
  if (started_) return;
  started_ = true;
  video_.buffer = PlaybackBuffer(config_.max_buffer_s, config_.resume_threshold_s, sim_.now());
  audio_.buffer = PlaybackBuffer(config_.max_buffer_s, config_.resume_threshold_s, sim_.now());
  step(audio_);
  step(video_);
}

void DashClient::step(Session& s) {
  if (aborted_) return;
  const Time now = sim_.now();
  s.buffer.advance(now);
  if (s.buffer.state() == PlaybackState::Ended) {
    rearm(s);
    return;
  }
  const auto& m = config_.manifest;
  if (!s.outstanding && s.next_index < m.segment_count() &&
      s.buffer.level() + m.segment_duration_s <= config_.max_buffer_s + kEps) {
    request_next(s);
  }
  rearm(s);
}

void DashClient::request_next(Session& s) {
  const auto& ladder = config_.manifest.ladder(s.media);
  std::size_t rep = 0;
  if (s.media == MediaType::Video && s.abr.has_estimate) rep = abr_select(s.abr, ladder);
  s.abr.last_index = rep;
  s.outstanding = true;
  s.current_rep = rep;
  s.request_time = sim_.now();
  const std::uint32_t index = s.next_index++;
  ++s.requests;
  const std::uint64_t bytes = server_.response_bytes(s.media, rep);
  conn_.request(transport::Side::Client, config_.request_bytes, bytes,
                [this, &s, index, rep](Time elapsed) { on_segment(s, index, rep, elapsed); });
}

void DashClient::on_segment(Session& s, std::uint32_t index, std::size_t rep, Time elapsed) {
  if (aborted_) return;
  const Time now = sim_.now();
  const auto& m = config_.manifest;
  const std::uint64_t bytes = server_.response_bytes(s.media, rep);
  s.outstanding = false;
  s.log.push_back({index, s.request_time.to_seconds(), now.to_seconds(),
                   m.ladder(s.media)[rep].bitrate_bps, bytes});
  s.abr = abr_update(s.abr, bytes, elapsed.to_seconds());
  s.buffer.add(m.segment_duration_s, now);
  if (s.next_index >= m.segment_count()) s.buffer.set_downloads_complete();
  step(s);
}

void DashClient::rearm(Session& s) {
  if (s.wake_armed) {
    sim_.cancel(s.wake);
    s.wake_armed = false;
  }
  if (aborted_ || s.buffer.state() == PlaybackState::Ended) return;
  const Time now = sim_.now();
  std::optional<Time> next = s.buffer.underrun_time();
  const auto& m = config_.manifest;
  if (!s.outstanding && s.next_index < m.segment_count() &&
      s.buffer.state() == PlaybackState::Playing) {
    const double excess = s.buffer.level() + m.segment_duration_s - config_.max_buffer_s;
    if (excess > 0) {
      const Time gate = now + Time::seconds(excess);
      if (!next || gate < *next) next = gate;
    }
  }
  if (!next) return;
  if (*next < now) next = now;
  s.wake_armed = true;
  s.wake = sim_.schedule_at(*next, [this, &s] {
    s.wake_armed = false;
    step(s);
  });
}

void DashClient::sample_buffers() {
  const Time now = sim_.now();
  for (Session* s : {&video_, &audio_}) {
    if (s->buffer.ended_at()) continue;
    s->samples.push_back({now.to_seconds(), s->buffer.level_at(now)});
  }
}

void DashClient::finalize() {
  for (Session* s : {&video_, &audio_}) {
    s->buffer.advance(sim_.now());
    if (s->wake_armed) sim_.cancel(s->wake);
    s->wake_armed = false;
  }
}

metrics::QoeReport DashClient::report(MediaType m) const {
  const Session& s = session(m);
  return metrics::make_report(m, s.log, s.samples, s.buffer.stalls(), s.buffer.startup_s());
}

}  // namespace aqmsim::apps
