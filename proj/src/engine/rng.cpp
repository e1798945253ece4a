#include "aqmsim/engine/rng.hpp"

namespace aqmsim::engine {
namespace {

std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

std::uint64_t RngStream::derive_seed(std::uint64_t master_seed, std::string_view label) {
  return splitmix64(splitmix64(master_seed) ^ fnv1a64(label));
}

RngStream::RngStream(std::uint64_t master_seed, std::string_view label)
    : master_seed_(master_seed), label_(label), gen_(derive_seed(master_seed, label)) {}

double RngStream::uniform() {
  // mt19937_64 output is fixed by the standard; the conversion is done here
  // rather than through <random> distributions, whose algorithms are not.
  return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
}

}  // namespace aqmsim::engine
