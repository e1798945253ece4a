#pragma once

#include <cstdint>
#include <deque>
#include <vector>

#include "aqmsim/engine/rng.hpp"
#include "aqmsim/engine/simulator.hpp"
#include "aqmsim/qdisc/pie.hpp"
#include "aqmsim/qdisc/qdisc.hpp"

namespace aqmsim::qdisc {

/// Bucket index of a flow: lookup3 over the 13-byte five-tuple, salted, modulo
/// num_buckets (which must be a power of two).
std::uint32_t classify_flow(const FlowKey& key, std::uint32_t salt, std::uint32_t num_buckets);

struct FqPieParams {
  PieParams pie;  // pie.limit_packets is unused; the global limit applies
  std::uint32_t num_buckets = 1024;
  std::uint32_t quantum = 1514;
  std::uint32_t limit_packets = 10240;
  std::uint64_t limit_bytes = 0;  // 0 = no byte limit
  std::uint32_t salt = 0;
};

/// Flow-queue PIE: per-bucket FIFO with its own PIE controller, served by
/// deficit round robin over the active buckets.
///
/// All buckets' controllers advance on one timer grid.  Buckets that sit idle
/// at the controller's fixed point are skipped, and a bucket touched for the
/// first time is brought up to date as if it had been updated all along, so
/// the result equals updating every bucket on every tick.
class FqPieQueue final : public Qdisc {
 public:
  struct BucketView {
    std::uint32_t index;
    std::size_t packets;
    std::uint64_t bytes;
    std::int64_t deficit;
    PieState pie;
  };

  FqPieQueue(engine::Simulator& sim, FqPieParams params, engine::RngStream rng);
  ~FqPieQueue() override;

  Verdict enqueue(Packet pkt) override;
  std::optional<Packet> dequeue() override;
  QdiscStats stats() const override;
  std::size_t backlog() const override { return total_packets_; }
  std::string_view kind() const override { return "fq_pie"; }

  std::uint32_t bucket_of(const FlowKey& key) const {
    return classify_flow(key, params_.salt, params_.num_buckets);
  }
  /// Active buckets in round-robin order.
  std::vector<BucketView> active_buckets() const;
  const FqPieParams& params() const { return params_; }

 private:
  struct Bucket {
    std::deque<Packet> queue;
    std::uint64_t bytes = 0;
    PieState pie;
    std::int64_t deficit = 0;
    bool active = false;   // in the round-robin schedule
    bool touched = false;  // controller state materialized
    bool tracked = false;  // in tracked_, i.e. updated every tick
  };

  Bucket& touch(std::uint32_t idx);
  void track(std::uint32_t idx);
  void drop_from_longest();
  void on_tick();

  engine::Simulator& sim_;
  FqPieParams params_;
  engine::RngStream rng_;
  std::vector<Bucket> buckets_;
  std::deque<std::uint32_t> schedule_;
  std::vector<std::uint32_t> tracked_;
  std::uint64_t ticks_ = 0;
  std::uint64_t total_packets_ = 0;
  std::uint64_t total_bytes_ = 0;
  QdiscStats stats_;
  engine::EventId timer_ = 0;
};

}  // namespace aqmsim::qdisc
