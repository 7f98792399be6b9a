#include "hvox/format.hpp"

#include <cctype>
#include <limits>
#include <sstream>

namespace hvox {

LevelKind kind_of(const LevelDesc& level) {
  return std::visit(
      [](const auto& l) {
        using T = std::decay_t<decltype(l)>;
        if constexpr (std::is_same_v<T, RawLevel>) return LevelKind::Raw;
        else if constexpr (std::is_same_v<T, DfLevel>) return LevelKind::DF;
        else if constexpr (std::is_same_v<T, SvoLevel>) return LevelKind::SVO;
        else return LevelKind::SVDAG;
      },
      level);
}

Coord log2_extent(const LevelDesc& level) {
  return std::visit(
      [](const auto& l) -> Coord {
        using T = std::decay_t<decltype(l)>;
        if constexpr (std::is_same_v<T, RawLevel> || std::is_same_v<T, DfLevel>)
          return Coord(l.w, l.h, l.d);
        else
          return Coord(l.depth, l.depth, l.depth);
      },
      level);
}

namespace {

class SignatureParser {
 public:
  explicit SignatureParser(std::string_view text) : text_(text) {}

  HybridFormat parse() {
    HybridFormat format;
    skip_ws();
    if (at_end()) throw FormatError("empty format signature", 0);
    while (!at_end()) {
      format.levels.push_back(parse_level());
      skip_ws();
    }
    return format;
  }

 private:
  bool at_end() const { return pos_ >= text_.size(); }
  char peek() const { return at_end() ? '\0' : text_[pos_]; }

  void skip_ws() {
    while (!at_end() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }

  [[noreturn]] void fail(const std::string& msg) const {
    std::ostringstream os;
    os << msg << " at position " << pos_;
    throw FormatError(os.str(), pos_);
  }

  void expect(char c) {
    skip_ws();
    if (peek() != c) fail(std::string("expected '") + c + "'");
    ++pos_;
  }

  // Appends one parameter; `n³` / `n^3` appends three copies.
  void parse_param(std::vector<int>& out) {
    skip_ws();
    if (peek() == '-') fail("negative parameter");
    if (!std::isdigit(static_cast<unsigned char>(peek()))) fail("expected non-negative integer");
    long long value = 0;
    while (std::isdigit(static_cast<unsigned char>(peek()))) {
      value = value * 10 + (peek() - '0');
      if (value > std::numeric_limits<int>::max()) fail("parameter too large");
      ++pos_;
    }
    if (peek() == '.') fail("non-integer parameter");
    int copies = 1;
    if (text_.substr(pos_, 2) == "\xC2\xB3") {
      pos_ += 2;
      copies = 3;
    } else if (peek() == '^') {
      ++pos_;
      if (peek() != '3') fail("only ^3 shorthand is supported");
      ++pos_;
      copies = 3;
    }
    for (int i = 0; i < copies; ++i) out.push_back(static_cast<int>(value));
  }

  LevelDesc parse_level() {
    const std::size_t start = pos_;
    const char tag = peek();
    if (tag != 'R' && tag != 'D' && tag != 'S' && tag != 'G') fail("expected level tag R, D, S or G");
    ++pos_;
    expect('(');
    std::vector<int> params;
    parse_param(params);
    skip_ws();
    while (peek() == ',') {
      ++pos_;
      parse_param(params);
      skip_ws();
    }
    expect(')');

    auto arity = [&](std::size_t n) {
      if (params.size() != n) {
        std::ostringstream os;
        os << "level '" << tag << "' takes " << n << " parameters, got " << params.size() << " at position "
           << start;
        throw FormatError(os.str(), start);
      }
    };
    switch (tag) {
      case 'R':
        arity(3);
        return RawLevel{params[0], params[1], params[2]};
      case 'D':
        arity(4);
        return DfLevel{params[0], params[1], params[2], static_cast<std::uint32_t>(params[3])};
      case 'S':
        arity(1);
        return SvoLevel{params[0]};
      default:
        arity(1);
        return SvdagLevel{params[0]};
    }
  }

  std::string_view text_;
  std::size_t pos_ = 0;
};

}  // namespace

HybridFormat parse_format(std::string_view signature) { return SignatureParser(signature).parse(); }

std::string format_to_string(const HybridFormat& format) {
  std::ostringstream os;
  bool first = true;
  for (const auto& level : format.levels) {
    if (!first) os << ' ';
    first = false;
    std::visit(
        [&](const auto& l) {
          using T = std::decay_t<decltype(l)>;
          if constexpr (std::is_same_v<T, RawLevel>)
            os << "R(" << l.w << ", " << l.h << ", " << l.d << ')';
          else if constexpr (std::is_same_v<T, DfLevel>)
            os << "D(" << l.w << ", " << l.h << ", " << l.d << ", " << l.max_dist << ')';
          else if constexpr (std::is_same_v<T, SvoLevel>)
            os << "S(" << l.depth << ')';
          else
            os << "G(" << l.depth << ')';
        },
        level);
  }
  return os.str();
}

FormatPlan compile_plan(const HybridFormat& format) {
  if (format.levels.empty()) throw FormatError("format has no levels");

  FormatPlan plan;
  plan.format_ = format;
  plan.levels_.reserve(format.levels.size());

  for (std::size_t k = 0; k < format.levels.size(); ++k) {
    const LevelDesc& desc = format.levels[k];
    PlanLevel level{desc, kind_of(desc), log2_extent(desc), Coord::Zero()};
    if (level.kind == LevelKind::SVO || level.kind == LevelKind::SVDAG) {
      if (level.log2_extent.x() < 1) throw FormatError("level " + std::to_string(k + 1) + ": depth must be >= 1");
    }
    if (level.kind == LevelKind::DF && std::get<DfLevel>(desc).max_dist < 1)
      throw FormatError("level " + std::to_string(k + 1) + ": max distance must be >= 1");
    if (k > 0 && !(level.log2_extent.x() == level.log2_extent.y() && level.log2_extent.y() == level.log2_extent.z()))
      throw FormatError("level " + std::to_string(k + 1) + ": every level but the first must be cubic");
    if ((level.log2_extent.array() > kMaxLog2Resolution).any())
      throw FormatError("level " + std::to_string(k + 1) + ": extent exceeds resolution cap");
    plan.levels_.push_back(level);
  }

  // Cell sizes accumulate bottom-up; levels below the first are cubic, so one scalar per level suffices.
  int log2_cell = 0;
  for (std::size_t k = plan.levels_.size(); k-- > 0;) {
    PlanLevel& level = plan.levels_[k];
    level.log2_cell = log2_cell;
    level.cell_size = std::int64_t{1} << log2_cell;
    level.extent = Coord(std::int64_t{1} << level.log2_extent.x(), std::int64_t{1} << level.log2_extent.y(),
                         std::int64_t{1} << level.log2_extent.z());
    if (k > 0) {
      log2_cell += static_cast<int>(level.log2_extent.x());
      if (log2_cell > kMaxLog2Resolution) throw FormatError("total resolution exceeds 2^20 per axis");
    }
  }
  const PlanLevel& top = plan.levels_.front();
  const Coord log2_res = top.log2_extent.array() + top.log2_cell;
  if ((log2_res.array() > kMaxLog2Resolution).any()) throw FormatError("total resolution exceeds 2^20 per axis");
  plan.resolution_ = top.extent * top.cell_size;
  return plan;
}

}  // namespace hvox
