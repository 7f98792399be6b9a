#include <doctest.h>

#include <random>
#include <sstream>

#include "hvox/voxelizer.hpp"
#include "oracles.hpp"

using namespace hvox;

namespace {

Mesh obj(const std::string& text) {
  std::istringstream in(text);
  return parse_obj(in);
}

}  // namespace

TEST_CASE("obj faces") {
  const Mesh tri = obj("v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 3\n");
  CHECK(tri.triangles.size() == 1);
  CHECK(tri.colors.at(0) == make_rgba(255, 255, 255, 255));

  const Mesh quad = obj("v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nf 1 2 3 4\n");
  REQUIRE(quad.triangles.size() == 2);
  CHECK(quad.triangles[0] == std::array<std::uint32_t, 3>{0, 1, 2});
  CHECK(quad.triangles[1] == std::array<std::uint32_t, 3>{0, 2, 3});

  const Mesh forms = obj("v 0 0 0\nv 1 0 0\nv 0 1 0\nvt 0 0\nvn 0 0 1\nf 1/1/1 2//1 -1\n");
  REQUIRE(forms.triangles.size() == 1);
  CHECK(forms.triangles[0] == std::array<std::uint32_t, 3>{0, 1, 2});
}

TEST_CASE("obj errors") {
  CHECK_THROWS_AS(obj("v 0 0 0\nv 1 0 0\nv 0 1 0\nf 0 1 2\n"), MeshError);
  CHECK_THROWS_AS(obj("v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 4\n"), MeshError);
  CHECK_THROWS_AS(obj("v 0 0 0\nv 1 0 0\nf 1 2\n"), MeshError);
  CHECK_THROWS_AS(obj("v 0 0\n"), MeshError);
  CHECK_THROWS_AS(obj("v 0 0 0\nf a b c\n"), MeshError);
  CHECK_THROWS_AS(load_mesh("/nonexistent/mesh.obj"), MeshError);
}

TEST_CASE("color directive applies to later faces") {
  const Mesh m = load_mesh(HVOX_TEST_DATA "/tetra.obj");
  REQUIRE(m.triangles.size() == 4);
  CHECK(m.colors[0] == make_rgba(220, 60, 40, 255));
  CHECK(m.colors[1] == make_rgba(220, 60, 40, 255));
  CHECK(m.colors[2] == make_rgba(40, 120, 220, 255));
  CHECK(m.colors[3] == make_rgba(40, 120, 220, 255));
}

TEST_CASE("fit transform") {
  Mesh cube = obj("v 0 0 0\nv 1 0 0\nv 0 1 0\nv 0 0 1\nv 1 1 1\nf 1 2 3\nf 1 4 5\n");
  const GridTransform t = fit_transform(cube, Coord(16, 16, 16));
  CHECK(t.scale == doctest::Approx(14.0));
  CHECK((t.apply(Vec3d::Zero()) - Vec3d::Constant(1.0)).norm() < 1e-12);
  CHECK((t.apply(Vec3d::Ones()) - Vec3d::Constant(15.0)).norm() < 1e-12);

  // Already the grid interior.
  Mesh inner = obj("v 1 1 1\nv 15 1 1\nv 1 15 15\nv 15 15 15\nf 1 2 3\nf 2 3 4\n");
  const GridTransform id = fit_transform(inner, Coord(16, 16, 16));
  CHECK(id.scale == doctest::Approx(1.0));
  CHECK(id.offset.norm() < 1e-12);

  // Aspect preserved, centered on the long axis.
  Mesh flat = obj("v 0 0 0\nv 2 0 0\nv 0 1 0\nf 1 2 3\n");
  const GridTransform f = fit_transform(flat, Coord(10, 10, 10));
  CHECK(f.scale == doctest::Approx(4.0));
  CHECK(f.apply(Vec3d(0, 0, 0)).x() == doctest::Approx(1.0));
  CHECK(f.apply(Vec3d(0, 1, 0)).y() == doctest::Approx(7.0));
  CHECK(f.apply(Vec3d(0, 0, 0)).z() == doctest::Approx(5.0));

  Mesh point = obj("v 1 2 3\nv 1 2 3\nv 1 2 3\nf 1 2 3\n");
  CHECK_THROWS_AS(fit_transform(point, Coord(16, 16, 16)), MeshError);
}

TEST_CASE("triangle box overlap basics") {
  const Vec3d lo(0, 0, 0), hi(1, 1, 1);
  CHECK(triangle_box_overlap<double>({Vec3d(0.2, 0.2, 0.5), Vec3d(0.8, 0.2, 0.5), Vec3d(0.5, 0.8, 0.5)}, lo, hi));
  CHECK_FALSE(triangle_box_overlap<double>({Vec3d(2, 0, 0), Vec3d(3, 1, 0), Vec3d(2, 1, 1)}, lo, hi));
  // Large triangle slicing through the box with all vertices outside.
  CHECK(triangle_box_overlap<double>({Vec3d(-5, -5, 0.5), Vec3d(5, -5, 0.5), Vec3d(0, 5, 0.5)}, lo, hi));
  // Touching a face counts for a closed box.
  CHECK(triangle_box_overlap<double>({Vec3d(1, 0, 0), Vec3d(2, 0, 0), Vec3d(1, 1, 0)}, lo, hi));
  // Degenerate triangles behave like their segment or point.
  CHECK(triangle_box_overlap<double>({Vec3d(0.5, 0.5, 0.5), Vec3d(0.5, 0.5, 0.5), Vec3d(0.5, 0.5, 0.5)}, lo, hi));
  CHECK_FALSE(triangle_box_overlap<double>({Vec3d(1.5, 0.5, 0.5), Vec3d(1.5, 0.5, 0.5), Vec3d(1.5, 0.5, 0.5)}, lo, hi));
  CHECK(triangle_box_overlap<double>({Vec3d(-1, 0.5, 0.5), Vec3d(2, 0.5, 0.5), Vec3d(2, 0.5, 0.5)}, lo, hi));
  CHECK_FALSE(triangle_box_overlap<double>({Vec3d(-1, 1.5, 0.5), Vec3d(2, 1.5, 0.5), Vec3d(2, 1.5, 0.5)}, lo, hi));
  // Single precision instantiation.
  CHECK(triangle_box_overlap<float>({Vec3<float>(0.2f, 0.2f, 0.5f), Vec3<float>(0.8f, 0.2f, 0.5f),
                                     Vec3<float>(0.5f, 0.8f, 0.5f)},
                                    Vec3<float>::Zero(), Vec3<float>::Ones()));
}

TEST_CASE("triangle box overlap matches clipping on random pairs") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-2.0, 3.0), s(0.1, 1.5);
  int decided = 0, positives = 0;
  for (int i = 0; i < 10000; ++i) {
    const std::array<Vec3d, 3> tri{Vec3d(u(rng), u(rng), u(rng)), Vec3d(u(rng), u(rng), u(rng)),
                                   Vec3d(u(rng), u(rng), u(rng))};
    const Vec3d lo(u(rng) * 0.3, u(rng) * 0.3, u(rng) * 0.3);
    const Vec3d hi = lo + Vec3d(s(rng), s(rng), s(rng));
    const double m = 1e-9;
    const bool inner = oracle::clip_overlap(tri, lo + Vec3d::Constant(m), hi - Vec3d::Constant(m));
    const bool outer = oracle::clip_overlap(tri, lo - Vec3d::Constant(m), hi + Vec3d::Constant(m));
    const bool got = triangle_box_overlap<double>(tri, lo, hi);
    if (inner) {
      REQUIRE(got);
      ++decided;
      ++positives;
    } else if (!outer) {
      REQUIRE_FALSE(got);
      ++decided;
    }
  }
  CHECK(decided > 9900);
  CHECK(positives > 1000);
}

TEST_CASE("single small triangle marks one voxel") {
  Mesh m;
  m.vertices = {Vec3d(5.2, 5.2, 5.5), Vec3d(5.8, 5.2, 5.5), Vec3d(5.5, 5.8, 5.5)};
  m.triangles = {{0, 1, 2}};
  m.colors = {make_rgba(1, 2, 3, 255)};
  ChunkedVoxelSource src(m, Coord(16, 16, 16), GridTransform{}, 3);
  int nonempty = 0;
  for_each_morton(Coord(16, 16, 16), [&](const Coord& p) {
    const Voxel v = src.sample(p);
    if (v) {
      ++nonempty;
      CHECK(p == Coord(5, 5, 5));
      CHECK(v == make_rgba(1, 2, 3, 255));
    }
  });
  CHECK(nonempty == 1);
}

TEST_CASE("empty mesh samples empty") {
  ChunkedVoxelSource src(Mesh{}, Coord(8, 8, 8));
  for_each_morton(Coord(8, 8, 8), [&](const Coord& p) { REQUIRE(src.sample(p) == kEmptyVoxel); });
}

TEST_CASE("chunked voxelization equals brute force on an icosphere") {
  const Mesh sphere = oracle::icosphere(2);
  const Coord res(32, 32, 32);
  for (int chunk_log2 : {2, 3, 5}) {
    ChunkedVoxelSource src(sphere, res, chunk_log2);
    const oracle::Grid expect = oracle::voxelize_dense(sphere, res, src.transform());
    std::size_t nonempty = 0, mismatches = 0;
    for_each_morton(res, [&](const Coord& p) {
      const Voxel v = src.sample(p);
      if (v) ++nonempty;
      if (v != expect.at(p)) ++mismatches;
    });
    CHECK(mismatches == 0);
    CHECK(nonempty > 1000);
    const std::int64_t per_axis = 32 >> chunk_log2;
    CHECK(src.chunk_loads() == static_cast<std::size_t>(per_axis * per_axis * per_axis));
    CHECK(src.peak_resident_bytes() == (std::size_t{4} << (3 * chunk_log2)));
  }
}

TEST_CASE("lowest triangle index wins") {
  Mesh m;
  m.vertices = {Vec3d(0, 0, 1.5), Vec3d(4, 0, 1.5), Vec3d(0, 4, 1.5)};
  m.triangles = {{0, 1, 2}, {0, 1, 2}};
  m.colors = {make_rgba(9, 9, 9, 255), make_rgba(7, 7, 7, 255)};
  ChunkedVoxelSource src(m, Coord(4, 4, 4), GridTransform{}, 1);
  bool any = false;
  for_each_morton(Coord(4, 4, 4), [&](const Coord& p) {
    const Voxel v = src.sample(p);
    if (v) {
      any = true;
      CHECK(v == make_rgba(9, 9, 9, 255));
    }
  });
  CHECK(any);
}

TEST_CASE("zero color is remapped away from the empty word") {
  CHECK(voxel_color(0) == 0x01000000u);
  CHECK(voxel_color(make_rgba(1, 2, 3, 4)) == make_rgba(1, 2, 3, 4));
  Mesh m;
  m.vertices = {Vec3d(0.2, 0.2, 0.5), Vec3d(0.8, 0.2, 0.5), Vec3d(0.5, 0.8, 0.5)};
  m.triangles = {{0, 1, 2}};
  m.colors = {0u};
  ChunkedVoxelSource src(m, Coord(2, 2, 2), GridTransform{});
  CHECK(src.sample(Coord(0, 0, 0)) == 0x01000000u);
}

TEST_CASE("out of order and out of range queries fail fast") {
  ChunkedVoxelSource src(oracle::icosphere(0), Coord(8, 8, 8), 2);
  src.sample(Coord(1, 1, 1));
  src.sample(Coord(1, 1, 1));
  CHECK_THROWS_AS(src.sample(Coord(0, 0, 0)), ContractError);
  CHECK_THROWS_AS(src.sample(Coord(8, 0, 0)), std::out_of_range);
  CHECK_THROWS_AS(src.sample(Coord(-1, 0, 0)), std::out_of_range);
}

TEST_CASE("chunk residency is charged to an attached account") {
  MemoryAccount account;
  ChunkedVoxelSource src(oracle::icosphere(1), Coord(16, 16, 16), 3);
  src.set_memory_account(&account);
  for_each_morton(Coord(16, 16, 16), [&](const Coord& p) { src.sample(p); });
  CHECK(account.peak() == 8 * 8 * 8 * sizeof(Voxel));
  src.set_memory_account(nullptr);
  CHECK(account.current() == 0);
}
