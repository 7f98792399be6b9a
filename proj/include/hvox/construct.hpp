#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <unordered_map>
#include <vector>

#include "hvox/buffer.hpp"
#include "hvox/format.hpp"
#include "hvox/memory.hpp"
#include "hvox/voxelizer.hpp"

namespace hvox {

struct ConstructOptions {
  /// Share one SVDAG node map across every sub-volume of a level.
  bool whole_level_dedup = false;
  std::uint64_t max_words = kMaxBufferWords;
};

struct ConstructStats {
  /// High-water mark of working memory: chunk cache, dedup maps, level arrays and queues.
  std::size_t peak_bytes = 0;
  std::size_t voxel_samples = 0;
  std::size_t dedup_hits = 0;
};

/// Words of one constructed sub-volume before it is written to the buffer.
struct SubVolume {
  std::vector<std::uint32_t> words;
  bool empty = true;
};

/// Canonical content of an SVDAG node, used as the de-duplication key.
struct DedupKey {
  std::array<std::uint32_t, 9> words{};
  std::uint8_t size = 0;

  bool operator==(const DedupKey& other) const {
    return size == other.size && std::equal(words.begin(), words.begin() + size, other.words.begin());
  }
  std::span<const std::uint32_t> view() const { return {words.data(), size}; }
};

struct DedupKeyHash {
  std::size_t operator()(const DedupKey& key) const noexcept;
};

/// Bottom-up builder for one volume. Every level constructor consumes its
/// children in Morton order, so voxel samples arrive in Morton order.
class VolumeBuilder {
 public:
  VolumeBuilder(const FormatPlan& plan, VoxelSource& source, const ConstructOptions& options = {},
                MemoryAccount* account = nullptr);

  /// Builds the sub-volume of level `k` whose lowest finest-level voxel is `lower`.
  SubVolume construct_level(std::size_t k, const Coord& lower);
  SubVolume construct_raw_level(std::size_t k, const Coord& lower);
  SubVolume construct_df_level(std::size_t k, const Coord& lower);
  SubVolume construct_svo_level(std::size_t k, const Coord& lower);
  /// Root node content; children are already written through the dedup map.
  SubVolume construct_svdag_level(std::size_t k, const Coord& lower);

  /// Writes a non-empty sub-volume of level `k` and returns its offset.
  std::uint32_t emit(std::size_t k, const SubVolume& sub);

  /// Builds the whole volume and patches the root pointer into word 0.
  Volume finish();

  const VolumeBuffer& buffer() const { return buffer_; }
  std::size_t voxel_samples() const { return samples_; }
  std::size_t dedup_hits() const { return dedup_hits_; }

 private:
  using DedupMap = std::unordered_map<DedupKey, std::uint32_t, DedupKeyHash>;

  // Terminating integer for the child of level k at `lower`: a color at the last level, else 0 or an offset.
  std::uint32_t child_term(std::size_t k, const Coord& lower);
  std::uint32_t dedup_node(std::size_t k, const DedupKey& key);
  void clear_dedup(std::size_t k);

  const FormatPlan& plan_;
  VoxelSource& source_;
  ConstructOptions options_;
  MemoryAccount* account_;
  VolumeBuffer buffer_;
  std::vector<DedupMap> dedup_;
  std::vector<std::size_t> dedup_bytes_;
  std::size_t samples_ = 0;
  std::size_t dedup_hits_ = 0;
};

/// Builds `plan` from `source`. The source resolution must equal the plan resolution.
Volume construct_volume(const FormatPlan& plan, VoxelSource& source, const ConstructOptions& options = {},
                        ConstructStats* stats = nullptr);

/// Per-cell L1 distance to the nearest occupied cell, clamped to `max_dist`,
/// by multi-source BFS over the 6-neighborhood. Grids are x-fastest.
std::vector<std::uint32_t> l1_distance_transform(std::span<const std::uint8_t> occupancy, const Coord& extent,
                                                 std::uint32_t max_dist);

}  // namespace hvox
