#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <string_view>

namespace aqmsim::engine {

/// Deterministic pseudo-random stream keyed by (master_seed, label).
///
/// The engine seed is derived by hashing the label and mixing it with the
/// master seed, so each consumer gets its own sequence and adding a consumer
/// never shifts the draws seen by another.
class RngStream {
 public:
  RngStream(std::uint64_t master_seed, std::string_view label);

  /// Next value in [0, 1) with 53 bits of precision.
  double uniform();
  /// Uniform in [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  std::uint64_t master_seed() const { return master_seed_; }
  const std::string& label() const { return label_; }

  static std::uint64_t derive_seed(std::uint64_t master_seed, std::string_view label);

 private:
  std::uint64_t master_seed_;
  std::string label_;
  std::mt19937_64 gen_;
};

}  // namespace aqmsim::engine
