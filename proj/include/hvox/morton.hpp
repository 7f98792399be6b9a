#pragma once

#include <algorithm>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "hvox/types.hpp"

namespace hvox {

using MortonCode = std::uint64_t;

constexpr std::uint64_t kMortonCoordLimit = std::uint64_t{1} << 20;

namespace detail {

// Spreads the low 21 bits of v so that bit i lands on bit 3i.
constexpr std::uint64_t part1by2(std::uint64_t v) {
  v &= 0x1fffff;
  v = (v | (v << 32)) & 0x1f00000000ffffULL;
  v = (v | (v << 16)) & 0x1f0000ff0000ffULL;
  v = (v | (v << 8)) & 0x100f00f00f00f00fULL;
  v = (v | (v << 4)) & 0x10c30c30c30c30c3ULL;
  v = (v | (v << 2)) & 0x1249249249249249ULL;
  return v;
}

constexpr std::uint64_t compact1by2(std::uint64_t v) {
  v &= 0x1249249249249249ULL;
  v = (v ^ (v >> 2)) & 0x10c30c30c30c30c3ULL;
  v = (v ^ (v >> 4)) & 0x100f00f00f00f00fULL;
  v = (v ^ (v >> 8)) & 0x1f0000ff0000ffULL;
  v = (v ^ (v >> 16)) & 0x1f00000000ffffULL;
  v = (v ^ (v >> 32)) & 0x1fffff;
  return v;
}

}  // namespace detail

/// Interleaves coordinate bits; x takes the least significant bit of each 3-bit group.
constexpr MortonCode encode3(std::uint64_t x, std::uint64_t y, std::uint64_t z) {
  if (x >= kMortonCoordLimit || y >= kMortonCoordLimit || z >= kMortonCoordLimit)
    throw std::out_of_range("morton coordinate exceeds 2^20");
  return detail::part1by2(x) | (detail::part1by2(y) << 1) | (detail::part1by2(z) << 2);
}

inline MortonCode encode3(const Coord& c) {
  return encode3(static_cast<std::uint64_t>(c.x()), static_cast<std::uint64_t>(c.y()),
                 static_cast<std::uint64_t>(c.z()));
}

inline Coord decode3(MortonCode code) {
  return Coord(static_cast<std::int64_t>(detail::compact1by2(code)),
               static_cast<std::int64_t>(detail::compact1by2(code >> 1)),
               static_cast<std::int64_t>(detail::compact1by2(code >> 2)));
}

/// Calls `fn(coord)` for every coordinate of the box [0, extent) in Morton order.
/// Non-cubic extents are padded to the enclosing power-of-two cube and the
/// out-of-range codes are skipped.
template <typename Fn>
void for_each_morton(const Coord& extent, Fn&& fn) {
  if ((extent.array() <= 0).any()) return;
  const std::int64_t longest = extent.maxCoeff();
  std::int64_t side = 1;
  while (side < longest) side <<= 1;
  if (extent.x() == side && extent.y() == side && extent.z() == side) {
    const MortonCode count = static_cast<MortonCode>(side) * side * side;
    for (MortonCode code = 0; code < count; ++code) fn(decode3(code));
    return;
  }
  // Padded cube: descend octants in child order and prune those outside the box.
  auto visit = [&](auto&& self, const Coord& origin, std::int64_t size) -> void {
    if (origin.x() >= extent.x() || origin.y() >= extent.y() || origin.z() >= extent.z()) return;
    if (size == 1) {
      fn(origin);
      return;
    }
    const std::int64_t half = size / 2;
    for (int child = 0; child < 8; ++child)
      self(self, Coord(origin.x() + (child & 1) * half, origin.y() + ((child >> 1) & 1) * half,
                       origin.z() + ((child >> 2) & 1) * half),
           half);
  };
  visit(visit, Coord::Zero(), side);
}

inline std::vector<Coord> morton_children(const Coord& extent) {
  std::vector<Coord> out;
  if ((extent.array() > 0).all()) out.reserve(static_cast<std::size_t>(extent.prod()));
  for_each_morton(extent, [&](const Coord& c) { out.push_back(c); });
  return out;
}

}  // namespace hvox
