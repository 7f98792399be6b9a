#include <doctest.h>

#include <random>

#include "hvox/construct.hpp"
#include "hvox/intersect.hpp"
#include "oracles.hpp"

using namespace hvox;

namespace {

Volume build(const std::string& sig, const oracle::Grid& g) {
  const FormatPlan plan = compile_plan(sig);
  DenseGridSource src(plan.resolution(), g.voxels);
  return construct_volume(plan, src);
}

Ray make_ray(const Vec3d& o, const Vec3d& d) {
  Ray r;
  r.origin = o;
  r.direction = d;
  return r;
}

// Generic direction: no component near zero, origin off the lattice.
Ray generic_ray(const Coord& res, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const Vec3d r = res.cast<double>();
  Vec3d target(u(rng) * r.x(), u(rng) * r.y(), u(rng) * r.z());
  Vec3d dir;
  do dir = Vec3d(u(rng) - 0.5, u(rng) - 0.5, u(rng) - 0.5);
  while (dir.cwiseAbs().minCoeff() < 0.05);
  dir.normalize();
  return make_ray(target - dir * r.norm() * 1.5, dir);
}

void check_oracle(const Volume& v, const oracle::Grid& g, const Ray& ray, bool restart) {
  IntersectOptions opts;
  opts.restart_sv = restart;
  const auto got = intersect_root(v, ray, opts);
  const auto want = oracle::first_hit(g, ray);
  REQUIRE(got.has_value() == want.has_value());
  if (!got) return;
  CHECK(got->voxel == want->voxel);
  CHECK(got->color == want->color);
  CHECK(std::abs(got->t - want->t) <= 1e-5 * g.res.cast<double>().norm());
  CHECK(got->t >= ray.t_min);
  CHECK(got->t <= ray.t_max);
  CHECK(got->normal.cwiseAbs().sum() == 1);
}

const char* kPlans[] = {"R(4,4,4)",   "R(2,2,2) R(1,1,1) R(1,1,1)", "R(2,2,2) G(2)", "D(2,2,2,3) G(2)", "S(1) G(3)",
                        "S(4)",       "G(4)",                       "D(4,4,4,4)",    "G(2) D(2,2,2,2)", "S(2) S(2)"};

}  // namespace

TEST_CASE("empty volume never hits") {
  std::mt19937_64 rng(1);
  const Volume v = build("R(2,2,2) G(2)", oracle::Grid(Coord(16, 16, 16)));
  for (int i = 0; i < 200; ++i) CHECK_FALSE(intersect_root(v, oracle::random_ray(Coord(16, 16, 16), rng)));
}

TEST_CASE("axis ray hits the single voxel on its -X face") {
  oracle::Grid g(Coord(16, 16, 16));
  g.set(Coord(5, 5, 5), make_rgba(9, 8, 7, 255));
  for (const char* sig : kPlans) {
    INFO(sig);
    const Volume v = build(sig, g);
    for (bool restart : {false, true}) {
      IntersectOptions opts;
      opts.restart_sv = restart;
      const auto hit = intersect_root(v, make_ray(Vec3d(-3, 5.5, 5.5), Vec3d::UnitX()), opts);
      REQUIRE(hit);
      CHECK(hit->voxel == Coord(5, 5, 5));
      CHECK(hit->color == make_rgba(9, 8, 7, 255));
      CHECK(hit->t == doctest::Approx(8.0));
      CHECK(hit->normal == Eigen::Vector3i(-1, 0, 0));
      const auto back = intersect_root(v, make_ray(Vec3d(20, 5.5, 5.5), -Vec3d::UnitX()), opts);
      REQUIRE(back);
      CHECK(back->normal == Eigen::Vector3i(1, 0, 0));
      CHECK_FALSE(intersect_root(v, make_ray(Vec3d(-3, 6.5, 5.5), Vec3d::UnitX()), opts));
    }
  }
}

TEST_CASE("random rays match the grid oracle on every plan") {
  std::mt19937_64 rng(99);
  const oracle::Grid sparse = oracle::random_grid(Coord(16, 16, 16), 0.01, 3, rng);
  const oracle::Grid blocky = oracle::blocky_grid(Coord(16, 16, 16), 5, rng);
  for (const oracle::Grid* g : {&sparse, &blocky}) {
    for (const char* sig : kPlans) {
      INFO(sig);
      const Volume v = build(sig, *g);
      for (int i = 0; i < 1500; ++i) {
        const Ray ray = oracle::random_ray(g->res, rng);
        check_oracle(v, *g, ray, false);
        check_oracle(v, *g, ray, true);
      }
    }
  }
}

TEST_CASE("non-cubic volume") {
  std::mt19937_64 rng(5);
  const oracle::Grid g = oracle::random_grid(Coord(8, 4, 16), 0.05, 2, rng);
  const Volume v = build("R(1, 0, 2) R(2, 2, 2)", g);
  for (int i = 0; i < 3000; ++i) check_oracle(v, g, oracle::random_ray(g.res, rng), false);
}

TEST_CASE("raw grid visits the cells the ray passes through") {
  oracle::Grid g(Coord(8, 8, 8));
  const Volume v = build("R(3,3,3)", g);
  // An empty grid still needs a root, so mark a voxel far from the rays below.
  oracle::Grid one(Coord(8, 8, 8));
  one.set(Coord(0, 0, 0), 1u);
  const Volume w = build("R(3,3,3)", one);
  std::mt19937_64 rng(4);
  int compared = 0;
  for (int i = 0; i < 500; ++i) {
    const Ray ray = generic_ray(g.res, rng);
    const auto cells = oracle::cells_along(g.res, ray);
    if (cells.empty() || cells.front() == Coord(0, 0, 0) ||
        std::find(cells.begin(), cells.end(), Coord(0, 0, 0)) != cells.end())
      continue;
    TraversalTrace trace;
    IntersectOptions opts;
    opts.trace = &trace;
    CHECK_FALSE(intersect_root(w, ray, opts));
    std::vector<Coord> visited;
    double last_t = -std::numeric_limits<double>::infinity();
    for (const Visit& visit : trace.visits) {
      REQUIRE(visit.kind == VisitKind::Tested);
      visited.push_back(visit.lower);
      CHECK(visit.t > last_t);
      last_t = visit.t;
    }
    CHECK(visited == cells);
    ++compared;
  }
  CHECK(compared > 300);
  CHECK(v.buffer.root() == 0);
}

TEST_CASE("distance field skipping matches raw traversal and never skips occupied cells") {
  std::mt19937_64 rng(23);
  oracle::Grid one(Coord(16, 16, 16));
  one.set(Coord(9, 4, 12), make_rgba(1, 2, 3, 255));
  const oracle::Grid sparse = oracle::random_grid(Coord(16, 16, 16), 0.004, 2, rng);
  for (const oracle::Grid* g : std::initializer_list<const oracle::Grid*>{&one, &sparse}) {
    const Volume raw = build("R(4,4,4)", *g);
    for (const char* sig : {"D(4,4,4,1)", "D(4,4,4,6)", "D(4,4,4,30)", "D(2,2,2,3) D(2,2,2,2)"}) {
      INFO(sig);
      const Volume df = build(sig, *g);
      std::size_t skipped = 0;
      for (int i = 0; i < 2000; ++i) {
        const Ray ray = i % 2 ? oracle::random_ray(g->res, rng)
                              : make_ray(Vec3d(-2, 4.5, 12.5), (Vec3d(9.5, 4.5, 12.5) - Vec3d(-2, 4.5, 12.5) +
                                                                Vec3d(0, i * 1e-3, -i * 1e-3))
                                                                   .normalized());
        TraversalTrace trace;
        IntersectOptions opts;
        opts.trace = &trace;
        const auto a = intersect_root(raw, ray);
        const auto b = intersect_root(df, ray, opts);
        REQUIRE(a.has_value() == b.has_value());
        if (a) CHECK(a->voxel == b->voxel);
        for (const Visit& visit : trace.visits) {
          if (visit.kind != VisitKind::Skipped) continue;
          ++skipped;
          for (std::int64_t z = 0; z < visit.size; ++z)
            for (std::int64_t y = 0; y < visit.size; ++y)
              for (std::int64_t x = 0; x < visit.size; ++x) REQUIRE(g->at(visit.lower + Coord(x, y, z)) == 0u);
        }
      }
      if (std::string(sig) != "D(4,4,4,1)") CHECK(skipped > 0);
    }
  }
}

TEST_CASE("axis-parallel rays on cell boundaries terminate") {
  std::mt19937_64 rng(3);
  const oracle::Grid g = oracle::random_grid(Coord(8, 8, 8), 0.05, 2, rng);
  for (const char* sig : {"R(3,3,3)", "D(3,3,3,4)", "S(3)", "G(3)", "R(1,1,1) G(2)"}) {
    INFO(sig);
    const Volume v = build(sig, g);
    for (int a = 0; a < 3; ++a)
      for (int s = 0; s <= 8; ++s)
        for (int t = 0; t <= 8; ++t)
          for (double sign : {1.0, -1.0}) {
            Vec3d o, d = Vec3d::Zero();
            const int b = (a + 1) % 3, c = (a + 2) % 3;
            o[a] = sign > 0 ? -1.0 : 9.0;
            o[b] = s;
            o[c] = t + 0.5;
            d[a] = sign;
            const Ray ray = make_ray(o, d);
            TraversalTrace trace;
            IntersectOptions opts;
            opts.trace = &trace;
            for (bool restart : {false, true}) {
              opts.restart_sv = restart;
              trace.visits.clear();
              check_oracle(v, g, ray, restart);
              intersect_root(v, ray, opts);
              CHECK(trace.visits.size() <= 3 * (8 + 8 + 8));
            }
          }
  }
}

TEST_CASE("full octree returns the first leaf for both variants") {
  oracle::Grid g(Coord(8, 8, 8));
  for (std::size_t i = 0; i < g.voxels.size(); ++i) g.voxels[i] = static_cast<Voxel>(0xff000000u | (i + 1));
  for (const char* sig : {"S(3)", "G(3)"}) {
    const Volume v = build(sig, g);
    const Ray ray = make_ray(Vec3d(4.3, 4.4, -5), Vec3d::UnitZ());
    for (bool restart : {false, true}) {
      IntersectOptions opts;
      opts.restart_sv = restart;
      const auto hit = intersect_root(v, ray, opts);
      REQUIRE(hit);
      CHECK(hit->voxel == Coord(4, 4, 0));
      CHECK(hit->normal == Eigen::Vector3i(0, 0, -1));
    }
  }
}

TEST_CASE("ray starting inside a voxel") {
  oracle::Grid g(Coord(8, 8, 8));
  g.set(Coord(3, 3, 3), make_rgba(1, 1, 1, 255));
  const Volume v = build("S(3)", g);
  const auto hit = intersect_root(v, make_ray(Vec3d(3.5, 3.5, 3.5), Vec3d(0.2, -0.9, 0.1).normalized()));
  REQUIRE(hit);
  CHECK(hit->voxel == Coord(3, 3, 3));
  CHECK(hit->t == 0.0);
  CHECK(hit->normal == Eigen::Vector3i(0, 1, 0));
}

TEST_CASE("ray interval bounds") {
  oracle::Grid g(Coord(8, 8, 8));
  g.set(Coord(2, 4, 4), make_rgba(1, 0, 0, 255));
  g.set(Coord(6, 4, 4), make_rgba(2, 0, 0, 255));
  const Volume v = build("R(1,1,1) S(2)", g);
  Ray ray = make_ray(Vec3d(0, 4.5, 4.5), Vec3d::UnitX());
  CHECK(intersect_root(v, ray)->color == make_rgba(1, 0, 0, 255));
  ray.t_min = 3.5;
  CHECK(intersect_root(v, ray)->color == make_rgba(2, 0, 0, 255));
  CHECK(intersect_root(v, ray)->t == 6.0);
  ray.t_max = 5.9;
  CHECK_FALSE(intersect_root(v, ray));
  ray.t_min = 0;
  ray.t_max = 2.0;
  CHECK(intersect_root(v, ray)->t == 2.0);
}

TEST_CASE("stack and restart traversals agree") {
  std::mt19937_64 rng(61);
  for (const char* sig : {"S(5)", "G(5)", "R(1,1,1) S(4)", "G(2) G(3)", "S(2) R(1,1,1) G(2)"}) {
    INFO(sig);
    const oracle::Grid g = oracle::blocky_grid(Coord(32, 32, 32), 8, rng);
    const Volume v = build(sig, g);
    IntersectOptions restart;
    restart.restart_sv = true;
    for (int i = 0; i < 3000; ++i) {
      const Ray ray = oracle::random_ray(g.res, rng);
      const auto a = intersect_root(v, ray), b = intersect_root(v, ray, restart);
      REQUIRE(a.has_value() == b.has_value());
      if (!a) continue;
      CHECK(a->voxel == b->voxel);
      CHECK(a->t == b->t);
      CHECK(a->normal == b->normal);
    }
  }
}

TEST_CASE("missed octants are not entered") {
  oracle::Grid g(Coord(16, 16, 16));
  g.set(Coord(1, 1, 1), 1u);
  g.set(Coord(14, 14, 14), 1u);
  const Volume v = build("S(4)", g);
  std::mt19937_64 rng(2);
  for (int i = 0; i < 200; ++i) {
    const Ray ray = generic_ray(g.res, rng);
    if (oracle::first_hit(g, ray)) continue;
    TraversalTrace trace;
    IntersectOptions opts;
    opts.trace = &trace;
    CHECK_FALSE(intersect_root(v, ray, opts));
    // Nodes overlapping the ray corridor, counted per level of the octree.
    std::size_t corridor = 0;
    for (int size = 16; size >= 2; size /= 2) {
      const auto cells = oracle::cells_along(Coord(16 / size, 16 / size, 16 / size),
                                             make_ray(ray.origin / size, ray.direction));
      corridor += cells.size();
    }
    std::size_t nodes = 0;
    for (const Visit& visit : trace.visits) nodes += visit.kind == VisitKind::Node;
    CHECK(nodes <= corridor);
  }
}

TEST_CASE("malformed octree depth is reported") {
  const FormatPlan plan = compile_plan("S(1)");
  // Root claims an internal child, which would need a second octree level.
  VolumeBuffer b(std::vector<std::uint32_t>{3, 0, 0, 1, 0x0001});
  const Ray ray = make_ray(Vec3d(0.5, 0.5, -1), Vec3d::UnitZ());
  CHECK_THROWS_AS(intersect_root(b, plan, ray), ContractError);
  IntersectOptions restart;
  restart.restart_sv = true;
  CHECK_THROWS_AS(intersect_root(b, plan, ray, restart), ContractError);
}

TEST_CASE("point queries") {
  oracle::Grid g(Coord(8, 8, 8));
  g.set(Coord(7, 0, 3), make_rgba(4, 5, 6, 7));
  const Volume v = build("D(1,1,1,2) G(2)", g);
  CHECK(point_query(v, Coord(7, 0, 3)) == make_rgba(4, 5, 6, 7));
  CHECK(point_query(v, Coord(6, 0, 3)) == 0u);
  CHECK_THROWS_AS(point_query(v, Coord(8, 0, 0)), std::out_of_range);
  CHECK_THROWS_AS(point_query(v, Coord(0, -1, 0)), std::out_of_range);
  const Volume empty = build("D(1,1,1,2) G(2)", oracle::Grid(Coord(8, 8, 8)));
  CHECK(point_query(empty, Coord(3, 3, 3)) == 0u);
}
