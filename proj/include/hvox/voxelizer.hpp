#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <stdexcept>
#include <vector>

#include "hvox/memory.hpp"
#include "hvox/morton.hpp"
#include "hvox/types.hpp"

namespace hvox {

struct Mesh {
  std::vector<Vec3d> vertices;
  std::vector<std::array<std::uint32_t, 3>> triangles;
  std::vector<Voxel> colors;  // one per triangle

  bool empty() const { return triangles.empty(); }
};

class MeshError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Reads an OBJ subset: `v x y z`, `f i j k ...` (fan-triangulated, 1-based or
/// negative-relative indices, `i/t/n` forms allowed) and `# color r g b a`,
/// which applies to the faces that follow it.
Mesh load_mesh(const std::filesystem::path& path);
Mesh parse_obj(std::istream& in);

/// Uniform scale followed by a translation: grid = scale * model + offset.
struct GridTransform {
  double scale = 1.0;
  Vec3d offset = Vec3d::Zero();

  Vec3d apply(const Vec3d& p) const { return scale * p + offset; }
};

/// Maps the mesh bounding box into the grid with a one-voxel margin, centered, aspect preserved.
GridTransform fit_transform(const Mesh& mesh, const Coord& resolution);

/// Separating-axis triangle / closed-box overlap test (box normals, triangle
/// normal, nine edge cross products).
template <typename Scalar>
bool triangle_box_overlap(const std::array<Vec3<Scalar>, 3>& tri, const Vec3<Scalar>& box_min,
                          const Vec3<Scalar>& box_max) {
  using V = Vec3<Scalar>;
  const V center = (box_min + box_max) / Scalar(2);
  const V half = (box_max - box_min) / Scalar(2);
  const V v0 = tri[0] - center, v1 = tri[1] - center, v2 = tri[2] - center;

  auto separated = [&](const V& axis) {
    const Scalar p0 = axis.dot(v0), p1 = axis.dot(v1), p2 = axis.dot(v2);
    const Scalar r = half.x() * std::abs(axis.x()) + half.y() * std::abs(axis.y()) + half.z() * std::abs(axis.z());
    return std::min({p0, p1, p2}) > r || std::max({p0, p1, p2}) < -r;
  };

  for (int a = 0; a < 3; ++a) {
    if (std::min({v0[a], v1[a], v2[a]}) > half[a] || std::max({v0[a], v1[a], v2[a]}) < -half[a]) return false;
  }
  const std::array<V, 3> edges{v1 - v0, v2 - v1, v0 - v2};
  if (separated(edges[0].cross(edges[1]))) return false;
  for (const V& e : edges) {
    for (int a = 0; a < 3; ++a) {
      if (separated(V::Unit(a).cross(e))) return false;
    }
  }
  return true;
}

/// Something the constructor can sample voxel-by-voxel.
class VoxelSource {
 public:
  virtual ~VoxelSource() = default;
  virtual Coord resolution() const = 0;
  virtual Voxel sample(const Coord& p) = 0;
  /// Attach an account that working memory is charged to.
  virtual void set_memory_account(MemoryAccount*) {}
};

// Fully materialized grid, x-fastest.
class DenseGridSource final : public VoxelSource {
 public:
  DenseGridSource(const Coord& resolution, std::vector<Voxel> voxels);
  explicit DenseGridSource(const Coord& resolution)
      : DenseGridSource(resolution, std::vector<Voxel>(static_cast<std::size_t>(resolution.prod()), kEmptyVoxel)) {}

  Coord resolution() const override { return resolution_; }
  Voxel sample(const Coord& p) override { return at(p); }

  Voxel at(const Coord& p) const { return voxels_[index(p)]; }
  void set(const Coord& p, Voxel v) { voxels_[index(p)] = v; }
  const std::vector<Voxel>& voxels() const { return voxels_; }

 private:
  std::size_t index(const Coord& p) const {
    return static_cast<std::size_t>(p.x() + resolution_.x() * (p.y() + resolution_.y() * p.z()));
  }

  Coord resolution_;
  std::vector<Voxel> voxels_;
};

// Voxels computed on demand by a pure function of the coordinate.
class FunctionSource final : public VoxelSource {
 public:
  FunctionSource(const Coord& resolution, std::function<Voxel(const Coord&)> fn)
      : resolution_(resolution), fn_(std::move(fn)) {}

  Coord resolution() const override { return resolution_; }
  Voxel sample(const Coord& p) override { return fn_(p); }

 private:
  Coord resolution_;
  std::function<Voxel(const Coord&)> fn_;
};

/// Lazily voxelizes a mesh one cubic chunk at a time. Queries must arrive in
/// non-decreasing Morton order; only one chunk is resident at any time.
class ChunkedVoxelSource final : public VoxelSource {
 public:
  static constexpr int kDefaultChunkLog2 = 6;

  ChunkedVoxelSource(Mesh mesh, const Coord& resolution, int chunk_log2 = kDefaultChunkLog2);
  ChunkedVoxelSource(Mesh mesh, const Coord& resolution, const GridTransform& transform,
                     int chunk_log2 = kDefaultChunkLog2);

  Coord resolution() const override { return resolution_; }
  Voxel sample(const Coord& p) override;
  void set_memory_account(MemoryAccount* account) override;

  std::int64_t chunk_extent() const { return chunk_extent_; }
  const GridTransform& transform() const { return transform_; }
  /// Number of chunk voxelizations performed so far.
  std::size_t chunk_loads() const { return chunk_loads_; }
  /// High-water mark of resident voxel payload, in bytes.
  std::size_t peak_resident_bytes() const { return peak_resident_bytes_; }

 private:
  struct GridTriangle {
    std::array<Vec3d, 3> p;
    Vec3d lo, hi;
    Voxel color;
  };

  void voxelize_chunk(MortonCode chunk_id);

  Coord resolution_;
  GridTransform transform_;
  int chunk_log2_;
  std::int64_t chunk_extent_;
  std::vector<GridTriangle> triangles_;

  std::vector<Voxel> chunk_;
  Coord chunk_origin_ = Coord::Zero();
  MortonCode current_chunk_ = ~MortonCode{0};
  MortonCode last_code_ = 0;
  bool any_served_ = false;

  std::size_t chunk_loads_ = 0;
  std::size_t peak_resident_bytes_ = 0;
  MemoryAccount* account_ = nullptr;
  std::size_t charged_ = 0;
};

/// Stored color for a triangle color; zero maps to the minimum-alpha word.
constexpr Voxel voxel_color(Voxel triangle_color) { return triangle_color == 0 ? Voxel{0x01000000u} : triangle_color; }

}  // namespace hvox
