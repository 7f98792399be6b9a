#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace hvox {

/// Integer voxel coordinates (or per-axis extents) on the finest grid.
using Coord = Eigen::Matrix<std::int64_t, 3, 1>;

template <typename Scalar>
using Vec3 = Eigen::Matrix<Scalar, 3, 1>;

using Vec3d = Vec3<double>;

/// 32-bit RGBA word. R in bits 0-7, G 8-15, B 16-23, A 24-31. Zero is empty.
using Voxel = std::uint32_t;

constexpr Voxel kEmptyVoxel = 0;

constexpr Voxel make_rgba(std::uint8_t r, std::uint8_t g, std::uint8_t b, std::uint8_t a) {
  return static_cast<Voxel>(r) | (static_cast<Voxel>(g) << 8) | (static_cast<Voxel>(b) << 16) |
         (static_cast<Voxel>(a) << 24);
}

constexpr std::uint8_t channel(Voxel v, int c) { return static_cast<std::uint8_t>(v >> (8 * c)); }

// Thrown when a caller breaks an access-order or structural contract.
class ContractError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

}  // namespace hvox
