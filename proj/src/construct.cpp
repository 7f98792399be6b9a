#include "hvox/construct.hpp"

#include <algorithm>
#include <deque>
#include <stdexcept>

#include "hvox/morton.hpp"

namespace hvox {

namespace {

// Rough per-entry footprint of a node-based hash map.
constexpr std::size_t kDedupEntryBytes =
    sizeof(std::pair<const DedupKey, std::uint32_t>) + 2 * sizeof(void*) + sizeof(std::size_t);

}  // namespace

std::size_t DedupKeyHash::operator()(const DedupKey& key) const noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL ^ key.size;
  for (std::uint8_t i = 0; i < key.size; ++i) {
    h ^= key.words[i];
    h *= 0x100000001b3ULL;
    h ^= h >> 29;
  }
  return static_cast<std::size_t>(h);
}

std::vector<std::uint32_t> l1_distance_transform(std::span<const std::uint8_t> occupancy, const Coord& extent,
                                                 std::uint32_t max_dist) {
  const auto n = static_cast<std::size_t>(extent.prod());
  if (occupancy.size() != n) throw std::invalid_argument("occupancy size does not match extent");
  std::vector<std::uint32_t> dist(n, max_dist);
  std::vector<std::uint32_t> frontier;
  for (std::size_t i = 0; i < n; ++i) {
    if (occupancy[i]) {
      dist[i] = 0;
      frontier.push_back(static_cast<std::uint32_t>(i));
    }
  }
  const std::int64_t sx = 1, sy = extent.x(), sz = extent.x() * extent.y();
  std::vector<std::uint32_t> next;
  for (std::uint32_t d = 1; d < max_dist && !frontier.empty(); ++d) {
    next.clear();
    for (std::uint32_t cell : frontier) {
      const std::int64_t x = cell % extent.x();
      const std::int64_t y = (cell / extent.x()) % extent.y();
      const std::int64_t z = cell / sz;
      auto relax = [&](bool inside, std::int64_t stride) {
        if (!inside) return;
        const auto m = static_cast<std::size_t>(static_cast<std::int64_t>(cell) + stride);
        if (dist[m] > d) {
          dist[m] = d;
          next.push_back(static_cast<std::uint32_t>(m));
        }
      };
      relax(x > 0, -sx);
      relax(x + 1 < extent.x(), sx);
      relax(y > 0, -sy);
      relax(y + 1 < extent.y(), sy);
      relax(z > 0, -sz);
      relax(z + 1 < extent.z(), sz);
    }
    frontier.swap(next);
  }
  return dist;
}

VolumeBuilder::VolumeBuilder(const FormatPlan& plan, VoxelSource& source, const ConstructOptions& options,
                             MemoryAccount* account)
    : plan_(plan),
      source_(source),
      options_(options),
      account_(account),
      buffer_(options.max_words),
      dedup_(plan.depth()),
      dedup_bytes_(plan.depth(), 0) {
  if (source.resolution() != plan.resolution()) throw std::invalid_argument("source resolution does not match plan");
}

std::uint32_t VolumeBuilder::child_term(std::size_t k, const Coord& lower) {
  if (plan_.is_last(k)) {
    ++samples_;
    return source_.sample(lower);
  }
  SubVolume sub = construct_level(k + 1, lower);
  return sub.empty ? 0u : emit(k + 1, sub);
}

SubVolume VolumeBuilder::construct_level(std::size_t k, const Coord& lower) {
  switch (plan_.level(k).kind) {
    case LevelKind::Raw:
      return construct_raw_level(k, lower);
    case LevelKind::DF:
      return construct_df_level(k, lower);
    case LevelKind::SVO:
      return construct_svo_level(k, lower);
    case LevelKind::SVDAG:
      return construct_svdag_level(k, lower);
  }
  throw std::logic_error("unknown level kind");
}

SubVolume VolumeBuilder::construct_raw_level(std::size_t k, const Coord& lower) {
  const PlanLevel& level = plan_.level(k);
  SubVolume sub;
  const auto count = static_cast<std::size_t>(level.extent.prod());
  ScopedCharge charge(account_, count * sizeof(std::uint32_t));
  sub.words.assign(count, 0u);
  for_each_morton(level.extent, [&](const Coord& c) {
    const std::uint32_t term = child_term(k, lower + c * level.cell_size);
    sub.words[linear_index(c, level.extent)] = term;
    if (term != 0) sub.empty = false;
  });
  return sub;
}

SubVolume VolumeBuilder::construct_df_level(std::size_t k, const Coord& lower) {
  const PlanLevel& level = plan_.level(k);
  const auto max_dist = std::get<DfLevel>(level.desc).max_dist;
  const auto count = static_cast<std::size_t>(level.extent.prod());

  std::vector<std::uint32_t> terms;
  ScopedCharge terms_charge(account_, count * sizeof(std::uint32_t));
  terms.assign(count, 0u);
  bool empty = true;
  for_each_morton(level.extent, [&](const Coord& c) {
    const std::uint32_t term = child_term(k, lower + c * level.cell_size);
    terms[linear_index(c, level.extent)] = term;
    if (term != 0) empty = false;
  });

  // Occupancy, distances and the interleaved output coexist while the transform runs.
  ScopedCharge work_charge(account_, count * (sizeof(std::uint8_t) + 2 * sizeof(std::uint32_t)) +
                                         count * 2 * sizeof(std::uint32_t));
  std::vector<std::uint8_t> occupancy(count);
  for (std::size_t i = 0; i < count; ++i) occupancy[i] = terms[i] != 0;
  const std::vector<std::uint32_t> dist = l1_distance_transform(occupancy, level.extent, max_dist);

  SubVolume sub;
  sub.empty = empty;
  sub.words.resize(2 * count);
  for (std::size_t i = 0; i < count; ++i) {
    sub.words[2 * i] = terms[i];
    sub.words[2 * i + 1] = dist[i];
  }
  return sub;
}

SubVolume VolumeBuilder::construct_svo_level(std::size_t k, const Coord& lower) {
  const PlanLevel& level = plan_.level(k);
  const int depth = static_cast<int>(level.log2_extent.x());

  // queues[d] collects the up to 8 children of the node being assembled at depth d-1.
  std::vector<std::array<SvoNode, 8>> queues(static_cast<std::size_t>(depth) + 1);
  std::vector<int> fill(static_cast<std::size_t>(depth) + 1, 0);
  ScopedCharge charge(account_, queues.size() * sizeof(std::array<SvoNode, 8>));
  SvoNode root;

  // A node is non-empty iff its first word is non-zero (valid offsets are >= 1, colors are non-zero).
  auto flush = [&](int d) -> SvoNode {
    const auto& q = queues[static_cast<std::size_t>(d)];
    SvMasks masks;
    std::vector<std::uint32_t> block;
    block.reserve(16);
    for (int i = 0; i < 8; ++i) {
      if (q[static_cast<std::size_t>(i)].first == 0) continue;
      masks.valid |= static_cast<std::uint8_t>(1u << i);
      block.push_back(q[static_cast<std::size_t>(i)].first);
      block.push_back(q[static_cast<std::size_t>(i)].masks.pack());
    }
    if (masks.valid == 0) return {};
    if (d == depth) masks.leaf = masks.valid;
    return {buffer_.append(block), masks};
  };

  auto push = [&](int d, SvoNode node) {
    while (true) {
      int& n = fill[static_cast<std::size_t>(d)];
      queues[static_cast<std::size_t>(d)][static_cast<std::size_t>(n++)] = node;
      if (n < 8) return;
      n = 0;
      node = flush(d);
      if (d == 1) {
        root = node;
        return;
      }
      --d;
    }
  };

  const MortonCode children = MortonCode{1} << (3 * depth);
  for (MortonCode code = 0; code < children; ++code) {
    const std::uint32_t term = child_term(k, lower + decode3(code) * level.cell_size);
    push(depth, SvoNode{term, {}});
  }

  SubVolume sub;
  sub.empty = root.first == 0;
  if (!sub.empty) sub.words = {root.first, root.masks.pack()};
  return sub;
}

SubVolume VolumeBuilder::construct_svdag_level(std::size_t k, const Coord& lower) {
  const PlanLevel& level = plan_.level(k);
  const int depth = static_cast<int>(level.log2_extent.x());
  if (!options_.whole_level_dedup) clear_dedup(k);

  std::vector<std::array<DedupKey, 8>> queues(static_cast<std::size_t>(depth) + 1);
  std::vector<int> fill(static_cast<std::size_t>(depth) + 1, 0);
  ScopedCharge charge(account_, queues.size() * sizeof(std::array<DedupKey, 8>));
  DedupKey root;

  // Empty nodes have size 0.
  auto flush = [&](int d) -> DedupKey {
    const auto& q = queues[static_cast<std::size_t>(d)];
    DedupKey parent;
    SvMasks masks;
    parent.size = 1;
    for (int i = 0; i < 8; ++i) {
      const DedupKey& child = q[static_cast<std::size_t>(i)];
      if (child.size == 0) continue;
      masks.valid |= static_cast<std::uint8_t>(1u << i);
      parent.words[parent.size++] = dedup_node(k, child);
    }
    if (masks.valid == 0) return {};
    if (d == depth) masks.leaf = masks.valid;
    parent.words[0] = masks.pack();
    return parent;
  };

  auto push = [&](int d, DedupKey node) {
    while (true) {
      int& n = fill[static_cast<std::size_t>(d)];
      queues[static_cast<std::size_t>(d)][static_cast<std::size_t>(n++)] = node;
      if (n < 8) return;
      n = 0;
      node = flush(d);
      if (d == 1) {
        root = node;
        return;
      }
      --d;
    }
  };

  const MortonCode children = MortonCode{1} << (3 * depth);
  for (MortonCode code = 0; code < children; ++code) {
    const std::uint32_t term = child_term(k, lower + decode3(code) * level.cell_size);
    DedupKey leaf;
    if (term != 0) {
      leaf.words[0] = term;
      leaf.size = 1;
    }
    push(depth, leaf);
  }

  SubVolume sub;
  sub.empty = root.size == 0;
  if (!sub.empty) sub.words.assign(root.words.begin(), root.words.begin() + root.size);
  return sub;
}

std::uint32_t VolumeBuilder::dedup_node(std::size_t k, const DedupKey& key) {
  DedupMap& map = dedup_[k];
  if (auto it = map.find(key); it != map.end()) {
    ++dedup_hits_;
    return it->second;
  }
  const std::uint32_t offset = buffer_.append(key.view());
  map.emplace(key, offset);
  dedup_bytes_[k] += kDedupEntryBytes;
  if (account_) account_->acquire(kDedupEntryBytes);
  return offset;
}

void VolumeBuilder::clear_dedup(std::size_t k) {
  dedup_[k].clear();
  if (account_) account_->release(dedup_bytes_[k]);
  dedup_bytes_[k] = 0;
}

std::uint32_t VolumeBuilder::emit(std::size_t k, const SubVolume& sub) {
  if (plan_.level(k).kind == LevelKind::SVDAG) {
    DedupKey key;
    key.size = static_cast<std::uint8_t>(sub.words.size());
    std::copy(sub.words.begin(), sub.words.end(), key.words.begin());
    return dedup_node(k, key);
  }
  return buffer_.append(sub.words);
}

Volume VolumeBuilder::finish() {
  SubVolume top = construct_level(0, Coord::Zero());
  buffer_.set_root(top.empty ? 0u : emit(0, top));
  for (std::size_t k = 0; k < dedup_.size(); ++k) clear_dedup(k);
  return {plan_, std::move(buffer_)};
}

Volume construct_volume(const FormatPlan& plan, VoxelSource& source, const ConstructOptions& options,
                        ConstructStats* stats) {
  MemoryAccount account;
  source.set_memory_account(&account);
  struct Detach {
    VoxelSource& s;
    ~Detach() { s.set_memory_account(nullptr); }
  } detach{source};

  VolumeBuilder builder(plan, source, options, &account);
  const std::size_t samples_before = builder.voxel_samples();
  Volume volume = builder.finish();
  if (stats) {
    stats->peak_bytes = account.peak();
    stats->voxel_samples = builder.voxel_samples() - samples_before;
    stats->dedup_hits = builder.dedup_hits();
  }
  return volume;
}

}  // namespace hvox
