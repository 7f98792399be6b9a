#include "hvox/voxelizer.hpp"

#include <algorithm>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>

namespace hvox {

namespace {

// Resolves one OBJ face-vertex token ("7", "7/1", "7//3", "-1") to a 0-based index.
std::uint32_t resolve_index(const std::string& token, std::size_t vertex_count, std::size_t line_no) {
  const std::string head = token.substr(0, token.find('/'));
  long long idx = 0;
  std::size_t used = 0;
  try {
    idx = std::stoll(head, &used);
  } catch (const std::exception&) {
    throw MeshError("line " + std::to_string(line_no) + ": malformed face index '" + token + "'");
  }
  if (used != head.size()) throw MeshError("line " + std::to_string(line_no) + ": malformed face index '" + token + "'");
  if (idx == 0) throw MeshError("line " + std::to_string(line_no) + ": face index 0 (OBJ indices are 1-based)");
  const long long resolved = idx > 0 ? idx - 1 : static_cast<long long>(vertex_count) + idx;
  if (resolved < 0 || resolved >= static_cast<long long>(vertex_count))
    throw MeshError("line " + std::to_string(line_no) + ": face index out of range");
  return static_cast<std::uint32_t>(resolved);
}

}  // namespace

Mesh parse_obj(std::istream& in) {
  Mesh mesh;
  Voxel color = make_rgba(255, 255, 255, 255);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream ls(line);
    std::string tag;
    if (!(ls >> tag)) continue;
    if (tag == "#") {
      std::string directive;
      if (ls >> directive && directive == "color") {
        int c[4] = {0, 0, 0, 255};
        int n = 0;
        while (n < 4 && ls >> c[n]) ++n;
        if (n < 3) throw MeshError("line " + std::to_string(line_no) + ": color directive needs r g b [a]");
        for (int& v : c) v = std::clamp(v, 0, 255);
        color = make_rgba(static_cast<std::uint8_t>(c[0]), static_cast<std::uint8_t>(c[1]),
                          static_cast<std::uint8_t>(c[2]), static_cast<std::uint8_t>(c[3]));
      }
    } else if (tag == "v") {
      Vec3d p;
      if (!(ls >> p.x() >> p.y() >> p.z())) throw MeshError("line " + std::to_string(line_no) + ": malformed vertex");
      mesh.vertices.push_back(p);
    } else if (tag == "f") {
      std::vector<std::uint32_t> face;
      std::string token;
      while (ls >> token) face.push_back(resolve_index(token, mesh.vertices.size(), line_no));
      if (face.size() < 3) throw MeshError("line " + std::to_string(line_no) + ": face needs at least 3 vertices");
      for (std::size_t i = 1; i + 1 < face.size(); ++i) {
        mesh.triangles.push_back({face[0], face[i], face[i + 1]});
        mesh.colors.push_back(color);
      }
    }
  }
  return mesh;
}

Mesh load_mesh(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw MeshError("cannot open mesh " + path.string());
  return parse_obj(in);
}

GridTransform fit_transform(const Mesh& mesh, const Coord& resolution) {
  if (mesh.vertices.empty()) throw MeshError("mesh has no vertices");
  Vec3d lo = Vec3d::Constant(std::numeric_limits<double>::infinity());
  Vec3d hi = -lo;
  // Only referenced vertices define the box.
  for (const auto& t : mesh.triangles)
    for (std::uint32_t i : t) {
      lo = lo.cwiseMin(mesh.vertices[i]);
      hi = hi.cwiseMax(mesh.vertices[i]);
    }
  if (mesh.triangles.empty())
    for (const auto& v : mesh.vertices) {
      lo = lo.cwiseMin(v);
      hi = hi.cwiseMax(v);
    }
  const Vec3d size = hi - lo;
  if (size.maxCoeff() <= 0.0) throw MeshError("mesh bounding box has zero extent");

  double scale = std::numeric_limits<double>::infinity();
  for (int a = 0; a < 3; ++a) {
    if (size[a] > 0.0) scale = std::min(scale, (static_cast<double>(resolution[a]) - 2.0) / size[a]);
  }
  if (!(scale > 0.0)) throw MeshError("grid too small for a one-voxel margin");
  const Vec3d grid_center = resolution.cast<double>() / 2.0;
  const Vec3d mesh_center = (lo + hi) / 2.0;
  return {scale, grid_center - scale * mesh_center};
}

DenseGridSource::DenseGridSource(const Coord& resolution, std::vector<Voxel> voxels)
    : resolution_(resolution), voxels_(std::move(voxels)) {
  if (voxels_.size() != static_cast<std::size_t>(resolution.prod()))
    throw std::invalid_argument("voxel count does not match resolution");
}

ChunkedVoxelSource::ChunkedVoxelSource(Mesh mesh, const Coord& resolution, int chunk_log2)
    : ChunkedVoxelSource(mesh, resolution, mesh.empty() ? GridTransform{} : fit_transform(mesh, resolution),
                         chunk_log2) {}

ChunkedVoxelSource::ChunkedVoxelSource(Mesh mesh, const Coord& resolution, const GridTransform& transform,
                                       int chunk_log2)
    : resolution_(resolution), transform_(transform) {
  if ((resolution.array() <= 0).any() || resolution.maxCoeff() > static_cast<std::int64_t>(kMortonCoordLimit))
    throw std::invalid_argument("bad voxel source resolution");
  if (chunk_log2 < 0 || chunk_log2 > 10) throw std::invalid_argument("chunk exponent out of range");
  int cube_log2 = 0;
  while ((std::int64_t{1} << cube_log2) < resolution.maxCoeff()) ++cube_log2;
  chunk_log2_ = std::min(chunk_log2, cube_log2);
  chunk_extent_ = std::int64_t{1} << chunk_log2_;

  triangles_.reserve(mesh.triangles.size());
  for (std::size_t i = 0; i < mesh.triangles.size(); ++i) {
    GridTriangle t;
    for (int k = 0; k < 3; ++k) t.p[k] = transform_.apply(mesh.vertices.at(mesh.triangles[i][k]));
    t.lo = t.p[0].cwiseMin(t.p[1]).cwiseMin(t.p[2]);
    t.hi = t.p[0].cwiseMax(t.p[1]).cwiseMax(t.p[2]);
    t.color = voxel_color(i < mesh.colors.size() ? mesh.colors[i] : make_rgba(255, 255, 255, 255));
    triangles_.push_back(t);
  }
}

void ChunkedVoxelSource::set_memory_account(MemoryAccount* account) {
  if (account_ && charged_) account_->release(charged_);
  account_ = account;
  if (account_ && charged_) account_->acquire(charged_);
}

Voxel ChunkedVoxelSource::sample(const Coord& p) {
  if ((p.array() < 0).any() || (p.array() >= resolution_.array()).any())
    throw std::out_of_range("voxel query outside the grid");
  const MortonCode code = encode3(p);
  if (any_served_ && code < last_code_)
    throw ContractError("voxel queries must arrive in non-decreasing Morton order");
  any_served_ = true;
  last_code_ = code;

  const MortonCode chunk_id = code >> (3 * chunk_log2_);
  if (chunk_id != current_chunk_) voxelize_chunk(chunk_id);
  const Coord local = p - chunk_origin_;
  return chunk_[static_cast<std::size_t>(local.x() + chunk_extent_ * (local.y() + chunk_extent_ * local.z()))];
}

void ChunkedVoxelSource::voxelize_chunk(MortonCode chunk_id) {
  const std::size_t words = static_cast<std::size_t>(chunk_extent_ * chunk_extent_ * chunk_extent_);
  if (chunk_.size() != words) {
    chunk_.assign(words, kEmptyVoxel);
    charged_ = words * sizeof(Voxel);
    if (account_) account_->acquire(charged_);
  } else {
    std::fill(chunk_.begin(), chunk_.end(), kEmptyVoxel);
  }
  peak_resident_bytes_ = std::max(peak_resident_bytes_, chunk_.size() * sizeof(Voxel));
  ++chunk_loads_;
  current_chunk_ = chunk_id;
  chunk_origin_ = decode3(chunk_id) * chunk_extent_;

  const Coord chunk_hi = (chunk_origin_.array() + chunk_extent_).min(resolution_.array());
  const Vec3d box_lo = chunk_origin_.cast<double>();
  const Vec3d box_hi = chunk_hi.cast<double>();
  for (const GridTriangle& t : triangles_) {
    if ((t.hi.array() < box_lo.array()).any() || (t.lo.array() > box_hi.array()).any()) continue;
    Coord lo, hi;
    for (int a = 0; a < 3; ++a) {
      lo[a] = std::max<std::int64_t>(chunk_origin_[a], static_cast<std::int64_t>(std::ceil(t.lo[a])) - 1);
      hi[a] = std::min<std::int64_t>(chunk_hi[a] - 1, static_cast<std::int64_t>(std::floor(t.hi[a])));
    }
    for (std::int64_t z = lo.z(); z <= hi.z(); ++z)
      for (std::int64_t y = lo.y(); y <= hi.y(); ++y)
        for (std::int64_t x = lo.x(); x <= hi.x(); ++x) {
          const Coord local = Coord(x, y, z) - chunk_origin_;
          Voxel& slot =
              chunk_[static_cast<std::size_t>(local.x() + chunk_extent_ * (local.y() + chunk_extent_ * local.z()))];
          if (slot != kEmptyVoxel) continue;
          const Vec3d vlo(static_cast<double>(x), static_cast<double>(y), static_cast<double>(z));
          if (triangle_box_overlap<double>(t.p, vlo, vlo + Vec3d::Ones())) slot = t.color;
        }
  }
}

}  // namespace hvox
