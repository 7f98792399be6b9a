#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "hvox/types.hpp"

namespace hvox {

// Level parameters are log2 extents.
struct RawLevel {
  int w = 0, h = 0, d = 0;
  bool operator==(const RawLevel&) const = default;
};

struct DfLevel {
  int w = 0, h = 0, d = 0;
  std::uint32_t max_dist = 1;
  bool operator==(const DfLevel&) const = default;
};

struct SvoLevel {
  int depth = 1;
  bool operator==(const SvoLevel&) const = default;
};

struct SvdagLevel {
  int depth = 1;
  bool operator==(const SvdagLevel&) const = default;
};

using LevelDesc = std::variant<RawLevel, DfLevel, SvoLevel, SvdagLevel>;

enum class LevelKind { Raw, DF, SVO, SVDAG };

LevelKind kind_of(const LevelDesc& level);

/// Per-axis log2 extent of one level (voxels of the next level per axis).
Coord log2_extent(const LevelDesc& level);

/// Ordered list of levels; index 0 is the highest level.
struct HybridFormat {
  std::vector<LevelDesc> levels;
  bool operator==(const HybridFormat&) const = default;
};

class FormatError : public std::runtime_error {
 public:
  FormatError(const std::string& what, std::size_t position = npos)
      : std::runtime_error(what), position_(position) {}

  /// Byte offset into the signature where parsing failed, or npos.
  std::size_t position() const { return position_; }

  static constexpr std::size_t npos = static_cast<std::size_t>(-1);

 private:
  std::size_t position_;
};

/// Parses `R(w,h,d)`, `D(w,h,d,m)`, `S(l)` and `G(l)` tokens separated by
/// whitespace. A parameter written `n³` (or `n^3`) expands to `n, n, n`.
HybridFormat parse_format(std::string_view signature);

/// Canonical signature, e.g. "R(4, 4, 4) G(8)".
std::string format_to_string(const HybridFormat& format);

struct PlanLevel {
  LevelDesc desc;
  LevelKind kind;
  Coord log2_extent;
  Coord extent;
  /// Edge length, in finest voxels, of one voxel of this level.
  std::int64_t cell_size = 1;
  int log2_cell = 0;
};

constexpr int kMaxLog2Resolution = 20;

class FormatPlan {
 public:
  FormatPlan() = default;

  const HybridFormat& format() const { return format_; }
  const std::vector<PlanLevel>& levels() const { return levels_; }
  const PlanLevel& level(std::size_t k) const { return levels_[k]; }
  std::size_t depth() const { return levels_.size(); }
  bool is_last(std::size_t k) const { return k + 1 == levels_.size(); }
  const Coord& resolution() const { return resolution_; }
  std::string signature() const { return format_to_string(format_); }

  bool operator==(const FormatPlan& other) const { return format_ == other.format_; }

 private:
  friend FormatPlan compile_plan(const HybridFormat& format);

  HybridFormat format_;
  std::vector<PlanLevel> levels_;
  Coord resolution_ = Coord::Zero();
};

/// Validates the format and derives per-level cell sizes and the total resolution.
FormatPlan compile_plan(const HybridFormat& format);

inline FormatPlan compile_plan(std::string_view signature) { return compile_plan(parse_format(signature)); }

}  // namespace hvox
