#pragma once

#include <compare>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "hvox/buffer.hpp"
#include "hvox/format.hpp"
#include "hvox/types.hpp"

namespace hvox {

/// Ray in finest-voxel units. Direction components with magnitude below 1e-12 count as zero.
struct Ray {
  Vec3d origin = Vec3d::Zero();
  Vec3d direction = Vec3d::UnitX();
  double t_min = 0.0;
  double t_max = std::numeric_limits<double>::infinity();
};

struct Hit {
  Voxel color = kEmptyVoxel;
  Coord voxel = Coord::Zero();
  double t = 0.0;
  Eigen::Vector3i normal = Eigen::Vector3i::Zero();
};

// A plane crossing along the ray. Crossings at equal t are ordered by axis,
// which fixes the visit order when a ray passes exactly through an edge or
// corner. Axis 3 stands for "all crossings at t have happened".
struct Event {
  double t = 0.0;
  int axis = 3;

  auto operator<=>(const Event& other) const {
    if (t < other.t) return std::strong_ordering::less;
    if (t > other.t) return std::strong_ordering::greater;
    return axis <=> other.axis;
  }
  bool operator==(const Event& other) const { return t == other.t && axis == other.axis; }
};

enum class VisitKind { Tested, Skipped, Node };

struct Visit {
  std::size_t level = 0;
  Coord lower = Coord::Zero();
  std::int64_t size = 1;
  double t = 0.0;
  VisitKind kind = VisitKind::Tested;
};

/// Optional instrumentation: every occupancy test, distance-field skip and
/// octree node visit, in traversal order.
struct TraversalTrace {
  std::vector<Visit> visits;
};

struct IntersectOptions {
  /// Stackless octree traversal that re-descends from the sub-volume root.
  bool restart_sv = false;
  TraversalTrace* trace = nullptr;
};

class RayTraversal {
 public:
  RayTraversal(std::span<const std::uint32_t> words, const FormatPlan& plan, const Ray& ray,
               const IntersectOptions& options = {});

  /// Reads the root pointer, clips the ray to the volume box and descends.
  std::optional<Hit> run();

  std::optional<Hit> intersect_level(std::size_t k, std::uint32_t ptr, const Coord& lower, Event entry, Event exit);
  /// Cell-by-cell stepping through a Raw or DF sub-volume.
  std::optional<Hit> dda_level(std::size_t k, std::uint32_t base, const Coord& lower, Event entry);
  std::optional<Hit> traverse_sv_stack(std::size_t k, std::uint32_t root, const Coord& lower, Event entry);
  std::optional<Hit> traverse_sv_restart(std::size_t k, std::uint32_t root, const Coord& lower, Event entry,
                                         Event exit);

 private:
  struct Cell {
    int child = 0;
    Event entry, exit;
  };
  struct ChildRef {
    bool leaf = false;
    std::uint32_t value = 0;  // terminating integer for leaves, node offset otherwise
  };

  Event plane(int axis, std::int64_t coord) const {
    return {(static_cast<double>(coord) - origin_[axis]) * inv_[axis], axis};
  }
  std::int64_t locate(int axis, std::int64_t lower, std::int64_t cell, std::int64_t count, const Event& state) const;
  Event box_exit(const Coord& lower, std::int64_t size) const;
  Hit make_hit(Voxel color, const Coord& voxel, const Event& entry) const;
  void record(std::size_t level, const Coord& lower, std::int64_t size, double t, VisitKind kind) const;

  template <typename OnCell, typename OnSkip>
  std::optional<Hit> walk(const Coord& lower, std::int64_t cell, const Coord& extent, Event entry, OnCell&& on_cell,
                          OnSkip&& on_skip);
  int ordered_children(const Coord& lower, std::int64_t half, Event entry, std::array<Cell, 4>& out);

  SvMasks node_masks(LevelKind kind, std::uint32_t node) const;
  ChildRef child_of(LevelKind kind, std::uint32_t node, const SvMasks& masks, int child) const;

  std::span<const std::uint32_t> words_;
  const FormatPlan& plan_;
  Ray ray_;
  IntersectOptions options_;
  Vec3d origin_, dir_, inv_;
};

/// First non-empty finest-level voxel pierced by the ray, or nothing.
std::optional<Hit> intersect_root(const VolumeBuffer& buffer, const FormatPlan& plan, const Ray& ray,
                                  const IntersectOptions& options = {});

inline std::optional<Hit> intersect_root(const Volume& volume, const Ray& ray, const IntersectOptions& options = {}) {
  return intersect_root(volume.buffer, volume.plan, ray, options);
}

/// Stored voxel at `p` by structural descent; 0 if empty.
Voxel point_query(const VolumeBuffer& buffer, const FormatPlan& plan, const Coord& p);

inline Voxel point_query(const Volume& volume, const Coord& p) { return point_query(volume.buffer, volume.plan, p); }

}  // namespace hvox
