#pragma once

#include <array>
#include <bit>
#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <vector>

#include "hvox/format.hpp"
#include "hvox/types.hpp"

namespace hvox {

/// Offsets are stored in one 32-bit word, so a buffer holds at most 2^32 words.
constexpr std::uint64_t kMaxBufferWords = std::uint64_t{1} << 32;

class BufferOverflow : public std::length_error {
 public:
  using std::length_error::length_error;
};

/// Word-addressable volume storage. Word 0 holds the root pointer.
class VolumeBuffer {
 public:
  explicit VolumeBuffer(std::uint64_t max_words = kMaxBufferWords) : words_(1, 0u), max_words_(max_words) {}
  explicit VolumeBuffer(std::vector<std::uint32_t> words, std::uint64_t max_words = kMaxBufferWords);

  /// Appends words and returns the offset of the first one.
  std::uint32_t append(std::span<const std::uint32_t> words);
  /// Reserves `count` zeroed words and returns their offset.
  std::uint32_t allocate(std::size_t count);

  std::uint32_t root() const { return words_[0]; }
  void set_root(std::uint32_t offset) { words_[0] = offset; }

  std::uint32_t operator[](std::size_t i) const { return words_[i]; }
  std::uint32_t& operator[](std::size_t i) { return words_[i]; }
  std::uint32_t at(std::size_t i) const;

  std::size_t size() const { return words_.size(); }
  std::size_t size_bytes() const { return words_.size() * sizeof(std::uint32_t); }
  std::span<const std::uint32_t> words() const { return words_; }

  bool operator==(const VolumeBuffer& other) const { return words_ == other.words_; }

 private:
  std::vector<std::uint32_t> words_;
  std::uint64_t max_words_;
};

struct SvMasks {
  std::uint8_t valid = 0;
  std::uint8_t leaf = 0;

  /// valid in bits 0-7, leaf in bits 8-15.
  constexpr std::uint32_t pack() const { return std::uint32_t{valid} | (std::uint32_t{leaf} << 8); }
  static constexpr SvMasks unpack(std::uint32_t word) {
    return {static_cast<std::uint8_t>(word & 0xffu), static_cast<std::uint8_t>((word >> 8) & 0xffu)};
  }
  constexpr bool is_valid(int child) const { return (valid >> child) & 1u; }
  constexpr bool is_leaf(int child) const { return (leaf >> child) & 1u; }
  /// Number of valid children with a lower index than `child`.
  constexpr int rank(int child) const { return std::popcount(static_cast<unsigned>(valid & ((1u << child) - 1u))); }
  constexpr int count() const { return std::popcount(static_cast<unsigned>(valid)); }

  bool operator==(const SvMasks&) const = default;
};

// SVO node: two words. `first` points at a contiguous block of 2-word child
// nodes (internal) or holds the terminating integer (leaf, masks zero).
struct SvoNode {
  std::uint32_t first = 0;
  SvMasks masks;
  bool operator==(const SvoNode&) const = default;
};

constexpr std::uint32_t kSvoNodeWords = 2;

SvoNode read_svo_node(std::span<const std::uint32_t> words, std::uint32_t offset);
void write_svo_node(VolumeBuffer& buffer, std::uint32_t offset, const SvoNode& node);

/// Offset of the node for valid child `child` of an internal node.
inline std::uint32_t svo_child_offset(const SvoNode& node, int child) {
  return node.first + kSvoNodeWords * static_cast<std::uint32_t>(node.masks.rank(child));
}

// SVDAG node: a leaf is one terminating integer; an internal node is a masks
// word followed by one pointer per valid child, in child order.
struct SvdagNode {
  bool leaf = false;
  std::uint32_t term = 0;
  SvMasks masks;
  std::array<std::uint32_t, 8> children{};  // indexed by child, 0 where invalid

  std::size_t word_count() const { return leaf ? 1 : 1 + static_cast<std::size_t>(masks.count()); }
  bool operator==(const SvdagNode&) const = default;
};

/// Serialized words of an SVDAG node (1 to 9 words).
std::vector<std::uint32_t> encode_svdag_node(const SvdagNode& node);
SvdagNode read_svdag_node(std::span<const std::uint32_t> words, std::uint32_t offset, bool is_leaf);
void write_svdag_node(VolumeBuffer& buffer, std::uint32_t offset, const SvdagNode& node);

/// x-fastest linear index within a level grid.
inline std::uint64_t linear_index(const Coord& cell, const Coord& extent) {
  return static_cast<std::uint64_t>(cell.x() + extent.x() * (cell.y() + extent.y() * cell.z()));
}

std::uint32_t raw_entry(std::span<const std::uint32_t> words, std::uint32_t base, std::uint64_t index);

struct DfEntry {
  std::uint32_t term = 0;
  std::uint32_t l1_dist = 0;
  bool operator==(const DfEntry&) const = default;
};

DfEntry df_entry(std::span<const std::uint32_t> words, std::uint32_t base, std::uint64_t index);

/// A constructed volume: its plan plus the serialized words.
struct Volume {
  FormatPlan plan;
  VolumeBuffer buffer;
};

class HvoxError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// .hvox layout, all little-endian:
//   "HVOX" | u32 version=1 | u32 signature length | signature bytes |
//   u32 res_x | u32 res_y | u32 res_z | u64 word count | u32 words...
constexpr std::uint32_t kHvoxVersion = 1;

std::vector<std::uint8_t> serialize_hvox(const Volume& volume);
Volume deserialize_hvox(std::span<const std::uint8_t> bytes);
void save_hvox(const Volume& volume, const std::filesystem::path& path);
Volume load_hvox(const std::filesystem::path& path);

/// Size of the header preceding the payload words.
std::size_t hvox_header_bytes(const FormatPlan& plan);

}  // namespace hvox
