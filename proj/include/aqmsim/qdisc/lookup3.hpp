#pragma once

#include <cstdint>
#include <span>

namespace aqmsim::qdisc {

/// Bob Jenkins' lookup3 hashlittle() over an arbitrary byte string.
///
/// Reads the input a byte at a time, so the result is identical on every
/// platform (it equals the little-endian word-reading variant).
std::uint32_t hashlittle(std::span<const std::uint8_t> data, std::uint32_t initval);

}  // namespace aqmsim::qdisc
