#include "hvox/intersect.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>

namespace hvox {

namespace {

constexpr double kZeroDirection = 1e-12;
constexpr int kMaxSvDepth = kMaxLog2Resolution;

Coord child_offset(int child) { return Coord(child & 1, (child >> 1) & 1, (child >> 2) & 1); }

}  // namespace

RayTraversal::RayTraversal(std::span<const std::uint32_t> words, const FormatPlan& plan, const Ray& ray,
                           const IntersectOptions& options)
    : words_(words), plan_(plan), ray_(ray), options_(options), origin_(ray.origin) {
  for (int a = 0; a < 3; ++a) {
    const double d = ray.direction[a];
    dir_[a] = std::abs(d) < kZeroDirection ? 0.0 : d;
    inv_[a] = dir_[a] == 0.0 ? std::numeric_limits<double>::infinity() : 1.0 / dir_[a];
  }
}

void RayTraversal::record(std::size_t level, const Coord& lower, std::int64_t size, double t, VisitKind kind) const {
  if (options_.trace) options_.trace->visits.push_back({level, lower, size, t, kind});
}

// Index of the cell along `axis` that holds the ray once every crossing up to `state` has happened.
std::int64_t RayTraversal::locate(int axis, std::int64_t lower, std::int64_t cell, std::int64_t count,
                                  const Event& state) const {
  const double o = origin_[axis];
  const double d = dir_[axis];
  const double p = d == 0.0 ? o : o + d * state.t;
  std::int64_t idx = 0;
  if (std::isfinite(p))
    idx = std::clamp<std::int64_t>(static_cast<std::int64_t>(std::floor((p - static_cast<double>(lower)) / cell)), 0,
                                   count - 1);
  auto boundary = [&](std::int64_t i) { return lower + i * cell; };
  if (d == 0.0) {
    while (idx > 0 && o < static_cast<double>(boundary(idx))) --idx;
    while (idx < count - 1 && o >= static_cast<double>(boundary(idx + 1))) ++idx;
  } else if (d > 0.0) {
    while (idx > 0 && plane(axis, boundary(idx)) > state) --idx;
    while (idx < count - 1 && plane(axis, boundary(idx + 1)) <= state) ++idx;
  } else {
    while (idx < count - 1 && plane(axis, boundary(idx + 1)) > state) ++idx;
    while (idx > 0 && plane(axis, boundary(idx)) <= state) --idx;
  }
  return idx;
}

Event RayTraversal::box_exit(const Coord& lower, std::int64_t size) const {
  Event exit{std::numeric_limits<double>::infinity(), 3};
  for (int a = 0; a < 3; ++a) {
    if (dir_[a] == 0.0) continue;
    const Event e = plane(a, dir_[a] > 0.0 ? lower[a] + size : lower[a]);
    if (e < exit) exit = e;
  }
  return exit;
}

Hit RayTraversal::make_hit(Voxel color, const Coord& voxel, const Event& entry) const {
  int axis = entry.axis;
  if (axis > 2) {
    // Ray starts inside the voxel: report the face facing the dominant direction.
    axis = 0;
    for (int a = 1; a < 3; ++a)
      if (std::abs(dir_[a]) > std::abs(dir_[axis])) axis = a;
  }
  Hit hit{color, voxel, entry.t, Eigen::Vector3i::Zero()};
  hit.normal[axis] = dir_[axis] > 0.0 ? -1 : 1;
  return hit;
}

template <typename OnCell, typename OnSkip>
std::optional<Hit> RayTraversal::walk(const Coord& lower, std::int64_t cell, const Coord& extent, Event entry,
                                      OnCell&& on_cell, OnSkip&& on_skip) {
  Coord idx;
  for (int a = 0; a < 3; ++a) idx[a] = locate(a, lower[a], cell, extent[a], entry);
  Event current = entry;
  std::uint32_t skip = 0;
  while (current.t <= ray_.t_max) {
    Event next{std::numeric_limits<double>::infinity(), 3};
    for (int a = 0; a < 3; ++a) {
      if (dir_[a] == 0.0) continue;
      const Event e = plane(a, lower[a] + (dir_[a] > 0.0 ? idx[a] + 1 : idx[a]) * cell);
      if (e < next) next = e;
    }
    if (skip > 0) {
      on_skip(idx, current);
      --skip;
    } else {
      std::uint32_t advance = 1;
      if (auto hit = on_cell(idx, current, next, advance)) return hit;
      skip = advance - 1;
    }
    if (next.axis > 2) return std::nullopt;
    idx[next.axis] += dir_[next.axis] > 0.0 ? 1 : -1;
    if (idx[next.axis] < 0 || idx[next.axis] >= extent[next.axis]) return std::nullopt;
    current = next;
  }
  return std::nullopt;
}

std::optional<Hit> RayTraversal::run() {
  if (words_.empty()) return std::nullopt;
  const std::uint32_t root = words_[0];
  if (root == 0) return std::nullopt;
  const Coord& res = plan_.resolution();
  Event entry{ray_.t_min, 3};
  Event exit{std::numeric_limits<double>::infinity(), 3};
  for (int a = 0; a < 3; ++a) {
    if (dir_[a] == 0.0) {
      if (origin_[a] < 0.0 || origin_[a] >= static_cast<double>(res[a])) return std::nullopt;
      continue;
    }
    const Event in = plane(a, dir_[a] > 0.0 ? 0 : res[a]);
    const Event out = plane(a, dir_[a] > 0.0 ? res[a] : 0);
    if (in > entry) entry = in;
    if (out < exit) exit = out;
  }
  if (!(entry < exit) || entry.t > ray_.t_max) return std::nullopt;
  return intersect_level(0, root, Coord::Zero(), entry, exit);
}

std::optional<Hit> RayTraversal::intersect_level(std::size_t k, std::uint32_t ptr, const Coord& lower, Event entry,
                                                 Event exit) {
  switch (plan_.level(k).kind) {
    case LevelKind::Raw:
    case LevelKind::DF:
      return dda_level(k, ptr, lower, entry);
    case LevelKind::SVO:
    case LevelKind::SVDAG:
      return options_.restart_sv ? traverse_sv_restart(k, ptr, lower, entry, exit)
                                 : traverse_sv_stack(k, ptr, lower, entry);
  }
  return std::nullopt;
}

std::optional<Hit> RayTraversal::dda_level(std::size_t k, std::uint32_t base, const Coord& lower, Event entry) {
  const PlanLevel& level = plan_.level(k);
  const bool df = level.kind == LevelKind::DF;
  const bool last = plan_.is_last(k);
  const std::int64_t cell = level.cell_size;

  auto on_cell = [&](const Coord& idx, const Event& in, const Event& out, std::uint32_t& advance) -> std::optional<Hit> {
    const Coord cell_lower = lower + idx * cell;
    record(k, cell_lower, cell, in.t, VisitKind::Tested);
    const std::uint64_t i = linear_index(idx, level.extent);
    const std::uint32_t term = df ? words_[base + 2 * i] : words_[base + i];
    if (term == 0) {
      if (df) advance = std::max<std::uint32_t>(1, words_[base + 2 * i + 1]);
      return std::nullopt;
    }
    if (last) return make_hit(term, cell_lower, in);
    return intersect_level(k + 1, term, cell_lower, in, out);
  };
  auto on_skip = [&](const Coord& idx, const Event& in) {
    record(k, lower + idx * cell, cell, in.t, VisitKind::Skipped);
  };
  return walk(lower, cell, level.extent, entry, on_cell, on_skip);
}

SvMasks RayTraversal::node_masks(LevelKind kind, std::uint32_t node) const {
  return SvMasks::unpack(kind == LevelKind::SVO ? words_[node + 1] : words_[node]);
}

RayTraversal::ChildRef RayTraversal::child_of(LevelKind kind, std::uint32_t node, const SvMasks& masks,
                                              int child) const {
  const auto rank = static_cast<std::uint32_t>(masks.rank(child));
  const bool leaf = masks.is_leaf(child);
  if (kind == LevelKind::SVO) {
    const std::uint32_t offset = words_[node] + kSvoNodeWords * rank;
    return {leaf, leaf ? words_[offset] : offset};
  }
  const std::uint32_t ptr = words_[node + 1 + rank];
  return {leaf, leaf ? words_[ptr] : ptr};
}

// Children of a node box in the order the ray enters them.
int RayTraversal::ordered_children(const Coord& lower, std::int64_t half, Event entry, std::array<Cell, 4>& out) {
  int count = 0;
  auto on_cell = [&](const Coord& idx, const Event& in, const Event& exit, std::uint32_t&) -> std::optional<Hit> {
    out[static_cast<std::size_t>(count++)] =
        Cell{static_cast<int>(idx.x() | (idx.y() << 1) | (idx.z() << 2)), in, exit};
    return std::nullopt;
  };
  walk(lower, half, Coord::Constant(2), entry, on_cell, [](const Coord&, const Event&) {});
  return count;
}

std::optional<Hit> RayTraversal::traverse_sv_stack(std::size_t k, std::uint32_t root, const Coord& lower,
                                                   Event entry) {
  const PlanLevel& level = plan_.level(k);
  const int depth = static_cast<int>(level.log2_extent.x());
  const bool last = plan_.is_last(k);

  struct Frame {
    std::uint32_t node;
    SvMasks masks;
    Coord lower;
    std::int64_t half;
    std::array<Cell, 4> cells;
    int count;
    int pos;
  };
  std::array<Frame, kMaxSvDepth> stack;
  int top = 0;

  auto push = [&](std::uint32_t node, const Coord& node_lower, std::int64_t size, const Event& in) {
    if (top >= depth) throw ContractError("octree traversal deeper than the level depth");
    record(k, node_lower, size, in.t, VisitKind::Node);
    Frame& f = stack[static_cast<std::size_t>(top++)];
    f.node = node;
    f.masks = node_masks(level.kind, node);
    f.lower = node_lower;
    f.half = size / 2;
    f.count = ordered_children(node_lower, f.half, in, f.cells);
    f.pos = 0;
  };

  push(root, lower, level.extent.x() * level.cell_size, entry);
  while (top > 0) {
    Frame& f = stack[static_cast<std::size_t>(top - 1)];
    if (f.pos == f.count) {
      --top;
      continue;
    }
    const Cell c = f.cells[static_cast<std::size_t>(f.pos++)];
    if (c.entry.t > ray_.t_max) return std::nullopt;
    if (!f.masks.is_valid(c.child)) continue;
    const Coord child_lower = f.lower + child_offset(c.child) * f.half;
    const ChildRef ref = child_of(level.kind, f.node, f.masks, c.child);
    if (!ref.leaf) {
      push(ref.value, child_lower, f.half, c.entry);
      continue;
    }
    record(k, child_lower, f.half, c.entry.t, VisitKind::Tested);
    if (ref.value == 0) continue;
    if (last) return make_hit(ref.value, child_lower, c.entry);
    if (auto hit = intersect_level(k + 1, ref.value, child_lower, c.entry, c.exit)) return hit;
  }
  return std::nullopt;
}

std::optional<Hit> RayTraversal::traverse_sv_restart(std::size_t k, std::uint32_t root, const Coord& lower,
                                                     Event entry, Event exit) {
  const PlanLevel& level = plan_.level(k);
  const int depth = static_cast<int>(level.log2_extent.x());
  const bool last = plan_.is_last(k);
  const std::int64_t full = level.extent.x() * level.cell_size;

  Event state = entry;
  while (state < exit) {
    if (state.t > ray_.t_max) return std::nullopt;
    std::uint32_t node = root;
    SvMasks masks = node_masks(level.kind, node);
    Coord box = lower;
    std::int64_t size = full;
    for (int d = 0; d < depth; ++d) {
      record(k, box, size, state.t, VisitKind::Node);
      const std::int64_t half = size / 2;
      int child = 0;
      for (int a = 0; a < 3; ++a)
        if (locate(a, box[a], half, 2, state) == 1) child |= 1 << a;
      const Coord child_lower = box + child_offset(child) * half;
      const Event child_exit = box_exit(child_lower, half);
      if (!masks.is_valid(child)) {
        state = child_exit;
        break;
      }
      const ChildRef ref = child_of(level.kind, node, masks, child);
      if (ref.leaf) {
        record(k, child_lower, half, state.t, VisitKind::Tested);
        if (ref.value != 0) {
          if (last) return make_hit(ref.value, child_lower, state);
          if (auto hit = intersect_level(k + 1, ref.value, child_lower, state, child_exit)) return hit;
        }
        state = child_exit;
        break;
      }
      if (d + 1 == depth) throw ContractError("octree traversal deeper than the level depth");
      node = ref.value;
      masks = node_masks(level.kind, node);
      box = child_lower;
      size = half;
    }
  }
  return std::nullopt;
}

std::optional<Hit> intersect_root(const VolumeBuffer& buffer, const FormatPlan& plan, const Ray& ray,
                                  const IntersectOptions& options) {
  return RayTraversal(buffer.words(), plan, ray, options).run();
}

Voxel point_query(const VolumeBuffer& buffer, const FormatPlan& plan, const Coord& p) {
  if ((p.array() < 0).any() || (p.array() >= plan.resolution().array()).any())
    throw std::out_of_range("point query outside the volume");
  const auto words = buffer.words();
  std::uint32_t ptr = words[0];
  Coord lower = Coord::Zero();
  for (std::size_t k = 0; k < plan.depth(); ++k) {
    if (ptr == 0) return kEmptyVoxel;
    const PlanLevel& level = plan.level(k);
    const Coord local = (p - lower) / level.cell_size;
    std::uint32_t term = 0;
    switch (level.kind) {
      case LevelKind::Raw:
        term = raw_entry(words, ptr, linear_index(local, level.extent));
        break;
      case LevelKind::DF:
        term = df_entry(words, ptr, linear_index(local, level.extent)).term;
        break;
      case LevelKind::SVO:
      case LevelKind::SVDAG: {
        const int depth = static_cast<int>(level.log2_extent.x());
        std::uint32_t node = ptr;
        for (int d = depth - 1; d >= 0; --d) {
          const int child = static_cast<int>(((local.x() >> d) & 1) | (((local.y() >> d) & 1) << 1) |
                                             (((local.z() >> d) & 1) << 2));
          if (level.kind == LevelKind::SVO) {
            const SvoNode n = read_svo_node(words, node);
            if (!n.masks.is_valid(child)) return kEmptyVoxel;
            const std::uint32_t offset = svo_child_offset(n, child);
            if (n.masks.is_leaf(child)) {
              term = read_svo_node(words, offset).first;
              break;
            }
            node = offset;
          } else {
            const SvdagNode n = read_svdag_node(words, node, false);
            if (!n.masks.is_valid(child)) return kEmptyVoxel;
            if (n.masks.is_leaf(child)) {
              term = read_svdag_node(words, n.children[static_cast<std::size_t>(child)], true).term;
              break;
            }
            node = n.children[static_cast<std::size_t>(child)];
          }
        }
        break;
      }
    }
    lower += local * level.cell_size;
    ptr = term;
  }
  return ptr;
}

}  // namespace hvox
