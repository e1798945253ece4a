// lookup3.c, by Bob Jenkins, May 2006, Public Domain.

#include "aqmsim/qdisc/lookup3.hpp"

#include <bit>

namespace aqmsim::qdisc {
namespace {

inline void mix(std::uint32_t& a, std::uint32_t& b, std::uint32_t& c) {
  a -= c;  a ^= std::rotl(c, 4);   c += b;
  b -= a;  b ^= std::rotl(a, 6);   a += c;
  c -= b;  c ^= std::rotl(b, 8);   b += a;
  a -= c;  a ^= std::rotl(c, 16);  c += b;
  b -= a;  b ^= std::rotl(a, 19);  a += c;
  c -= b;  c ^= std::rotl(b, 4);   b += a;
}

inline void final_mix(std::uint32_t& a, std::uint32_t& b, std::uint32_t& c) {
  c ^= b; c -= std::rotl(b, 14);
  a ^= c; a -= std::rotl(c, 11);
  b ^= a; b -= std::rotl(a, 25);
  c ^= b; c -= std::rotl(b, 16);
  a ^= c; a -= std::rotl(c, 4);
  b ^= a; b -= std::rotl(a, 14);
  c ^= b; c -= std::rotl(b, 24);
}

inline std::uint32_t load_le(const std::uint8_t* k, std::size_t n) {
  std::uint32_t v = 0;
  for (std::size_t i = 0; i < n; ++i) {
    v |= static_cast<std::uint32_t>(k[i]) << (8 * i);
  }
  return v;
}

}  // namespace

std::uint32_t hashlittle(std::span<const std::uint8_t> data, std::uint32_t initval) {
  std::size_t length = data.size();
  std::uint32_t a = 0xdeadbeef + static_cast<std::uint32_t>(length) + initval;
  std::uint32_t b = a;
  std::uint32_t c = a;
  const std::uint8_t* k = data.data();

  while (length > 12) {
    a += load_le(k, 4);
    b += load_le(k + 4, 4);
    c += load_le(k + 8, 4);
    mix(a, b, c);
    length -= 12;
    k += 12;
  }
  if (length == 0) {
    return c;
  }
  // Last block: up to 12 bytes, zero padded.
  a += load_le(k, length < 4 ? length : 4);
  if (length > 4) b += load_le(k + 4, length < 8 ? length - 4 : 4);
  if (length > 8) c += load_le(k + 8, length - 8);
  final_mix(a, b, c);
  return c;
}

}  // namespace aqmsim::qdisc
