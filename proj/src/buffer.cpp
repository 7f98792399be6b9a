#include "hvox/buffer.hpp"

#include <fstream>
#include <iterator>
#include <sstream>
#include <string>

namespace hvox {

VolumeBuffer::VolumeBuffer(std::vector<std::uint32_t> words, std::uint64_t max_words)
    : words_(std::move(words)), max_words_(max_words) {
  if (words_.empty()) words_.push_back(0);
  if (words_.size() > max_words_) throw BufferOverflow("volume buffer exceeds word limit");
}

std::uint32_t VolumeBuffer::append(std::span<const std::uint32_t> words) {
  if (words_.size() + words.size() > max_words_)
    throw BufferOverflow("volume buffer would exceed " + std::to_string(max_words_) + " words");
  const auto offset = static_cast<std::uint32_t>(words_.size());
  words_.insert(words_.end(), words.begin(), words.end());
  return offset;
}

std::uint32_t VolumeBuffer::allocate(std::size_t count) {
  if (words_.size() + count > max_words_)
    throw BufferOverflow("volume buffer would exceed " + std::to_string(max_words_) + " words");
  const auto offset = static_cast<std::uint32_t>(words_.size());
  words_.resize(words_.size() + count, 0u);
  return offset;
}

std::uint32_t VolumeBuffer::at(std::size_t i) const {
  if (i >= words_.size()) throw std::out_of_range("buffer offset out of range");
  return words_[i];
}

namespace {

void check_range(std::span<const std::uint32_t> words, std::uint64_t first, std::uint64_t count) {
  if (first + count > words.size()) throw std::out_of_range("buffer offset out of range");
}

}  // namespace

SvoNode read_svo_node(std::span<const std::uint32_t> words, std::uint32_t offset) {
  check_range(words, offset, kSvoNodeWords);
  return {words[offset], SvMasks::unpack(words[offset + 1])};
}

void write_svo_node(VolumeBuffer& buffer, std::uint32_t offset, const SvoNode& node) {
  check_range(buffer.words(), offset, kSvoNodeWords);
  buffer[offset] = node.first;
  buffer[offset + 1] = node.masks.pack();
}

std::vector<std::uint32_t> encode_svdag_node(const SvdagNode& node) {
  if (node.leaf) return {node.term};
  std::vector<std::uint32_t> out;
  out.reserve(node.word_count());
  out.push_back(node.masks.pack());
  for (int child = 0; child < 8; ++child)
    if (node.masks.is_valid(child)) out.push_back(node.children[child]);
  return out;
}

SvdagNode read_svdag_node(std::span<const std::uint32_t> words, std::uint32_t offset, bool is_leaf) {
  SvdagNode node;
  node.leaf = is_leaf;
  check_range(words, offset, 1);
  if (is_leaf) {
    node.term = words[offset];
    return node;
  }
  node.masks = SvMasks::unpack(words[offset]);
  check_range(words, offset, 1 + static_cast<std::uint64_t>(node.masks.count()));
  std::uint32_t next = offset + 1;
  for (int child = 0; child < 8; ++child)
    if (node.masks.is_valid(child)) node.children[child] = words[next++];
  return node;
}

void write_svdag_node(VolumeBuffer& buffer, std::uint32_t offset, const SvdagNode& node) {
  const auto encoded = encode_svdag_node(node);
  check_range(buffer.words(), offset, encoded.size());
  for (std::size_t i = 0; i < encoded.size(); ++i) buffer[offset + i] = encoded[i];
}

std::uint32_t raw_entry(std::span<const std::uint32_t> words, std::uint32_t base, std::uint64_t index) {
  check_range(words, base + index, 1);
  return words[base + index];
}

DfEntry df_entry(std::span<const std::uint32_t> words, std::uint32_t base, std::uint64_t index) {
  check_range(words, base + 2 * index, 2);
  return {words[base + 2 * index], words[base + 2 * index + 1]};
}

namespace {

class ByteWriter {
 public:
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) bytes.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) bytes.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void raw(std::string_view s) { bytes.insert(bytes.end(), s.begin(), s.end()); }

  std::vector<std::uint8_t> bytes;
};

class ByteReader {
 public:
  explicit ByteReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  std::uint32_t u32() { return static_cast<std::uint32_t>(take(4)); }
  std::uint64_t u64() { return take(8); }
  std::string raw(std::size_t n) {
    need(n);
    std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  void need(std::uint64_t n) const {
    if (n > remaining()) throw HvoxError("truncated .hvox data");
  }
  std::uint64_t take(int n) {
    need(static_cast<std::uint64_t>(n));
    std::uint64_t v = 0;
    for (int i = 0; i < n; ++i) v |= static_cast<std::uint64_t>(bytes_[pos_ + i]) << (8 * i);
    pos_ += static_cast<std::size_t>(n);
    return v;
  }

  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

constexpr std::string_view kMagic = "HVOX";

}  // namespace

std::size_t hvox_header_bytes(const FormatPlan& plan) { return 4 + 4 + 4 + plan.signature().size() + 12 + 8; }

std::vector<std::uint8_t> serialize_hvox(const Volume& volume) {
  const std::string signature = volume.plan.signature();
  ByteWriter w;
  w.bytes.reserve(hvox_header_bytes(volume.plan) + volume.buffer.size_bytes());
  w.raw(kMagic);
  w.u32(kHvoxVersion);
  w.u32(static_cast<std::uint32_t>(signature.size()));
  w.raw(signature);
  for (int a = 0; a < 3; ++a) w.u32(static_cast<std::uint32_t>(volume.plan.resolution()[a]));
  w.u64(volume.buffer.size());
  for (std::uint32_t word : volume.buffer.words()) w.u32(word);
  return std::move(w.bytes);
}

Volume deserialize_hvox(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  if (r.raw(4) != kMagic) throw HvoxError("bad .hvox magic");
  const std::uint32_t version = r.u32();
  if (version != kHvoxVersion) throw HvoxError("unsupported .hvox version " + std::to_string(version));
  const std::uint32_t sig_len = r.u32();
  const std::string signature = r.raw(sig_len);
  FormatPlan plan;
  try {
    plan = compile_plan(signature);
  } catch (const FormatError& e) {
    throw HvoxError(std::string("bad format signature in .hvox: ") + e.what());
  }
  Coord res;
  for (int a = 0; a < 3; ++a) res[a] = r.u32();
  if (res != plan.resolution()) throw HvoxError("resolution does not match format signature");
  const std::uint64_t count = r.u64();
  if (count == 0 || count > kMaxBufferWords) throw HvoxError("bad payload word count");
  if (count * 4 > r.remaining()) throw HvoxError("truncated .hvox data");
  std::vector<std::uint32_t> words(static_cast<std::size_t>(count));
  for (auto& word : words) word = r.u32();
  if (r.remaining() != 0) throw HvoxError("trailing bytes after .hvox payload");
  return {std::move(plan), VolumeBuffer(std::move(words))};
}

void save_hvox(const Volume& volume, const std::filesystem::path& path) {
  const auto bytes = serialize_hvox(volume);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw HvoxError("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw HvoxError("write failed: " + path.string());
}

Volume load_hvox(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw HvoxError("cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return deserialize_hvox(bytes);
}

}  // namespace hvox
