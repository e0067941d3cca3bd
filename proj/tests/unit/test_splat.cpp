#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "squasplat/splat.hpp"
#include "support/oracles.hpp"

using namespace squasplat;

namespace {

Superquadric sphere(const Vec3& c, double r, int classes = 2, int k = 0) {
  Superquadric sq;
  sq.center = c;
  sq.scale = Vec3::Constant(r);
  sq.semantics = one_hot(classes, k);
  return sq;
}

GridSpec unit_voxels(int n) {
  GridSpec g;
  g.lower = Vec3::Zero();
  g.upper = Vec3::Constant(n);
  g.resolution = {n, n, n};
  return g;
}

// Tiles holding at least one voxel center inside the box, by enumeration.
std::vector<std::uint32_t> brute_tiles(const GridSpec& spec, const Aabb& box,
                                       int tile) {
  std::set<std::uint32_t> out;
  const int tx = (spec.resolution[0] + tile - 1) / tile;
  const int ty = (spec.resolution[1] + tile - 1) / tile;
  for (std::size_t v = 0; v < spec.voxel_count(); ++v) {
    const Index3 idx = spec.unravel(v);
    const Vec3 c = spec.voxel_center(idx);
    if ((c.array() >= box.min.array()).all() && (c.array() <= box.max.array()).all()) {
      out.insert(static_cast<std::uint32_t>(
          idx[0] / tile + tx * (idx[1] / tile + ty * (idx[2] / tile))));
    }
  }
  return {out.begin(), out.end()};
}

}  // namespace

TEST_CASE("extent bound closed forms") {
  FieldConfig cfg;
  const Superquadric s = sphere(Vec3::Zero(), 1.0);
  cfg.cutoff = 0.5;
  Aabb b = extent_bound(s, cfg);
  CHECK(b.max.isApprox(Vec3::Ones(), 1e-12));
  CHECK(b.min.isApprox(-Vec3::Ones(), 1e-12));

  cfg.cutoff = 0.25;
  b = extent_bound(s, cfg);
  for (int a = 0; a < 3; ++a) CHECK(b.max[a] == doctest::Approx(std::sqrt(2.0)));

  cfg.cutoff = 0.5;
  Superquadric r = s;
  r.scale = Vec3(2, 1, 1);
  const Aabb straight = extent_bound(r, cfg);
  r.rotation = quat_from_axis_angle(Vec3::UnitZ(), std::numbers::pi / 2);
  const Aabb turned = extent_bound(r, cfg);
  CHECK(turned.max.x() == doctest::Approx(straight.max.y()));
  CHECK(turned.max.y() == doctest::Approx(straight.max.x()));
  CHECK(turned.max.z() == doctest::Approx(straight.max.z()));
}

TEST_CASE("extent bound is sound") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const FieldConfig cfg;
  oracle::SceneRanges ranges;
  ranges.eps_min = 0.1;
  ranges.eps_max = 2.0;
  int tested = 0;
  while (tested < 100000) {
    const Superquadric sq = normalize(oracle::random_primitive(rng, 1, ranges));
    const Aabb b = extent_bound(sq, cfg);
    const Vec3 half = 0.5 * (b.max - b.min);
    const Vec3 mid = 0.5 * (b.max + b.min);
    for (int t = 0; t < 100; ++t) {
      // Sample a slightly enlarged box and keep only points outside the bound.
      Vec3 p;
      for (int a = 0; a < 3; ++a) p[a] = mid[a] + (2 * u(rng) - 1) * 1.5 * half[a];
      if ((p.array() >= b.min.array()).all() && (p.array() <= b.max.array()).all()) {
        continue;
      }
      ++tested;
      REQUIRE(oracle::occupancy(p, sq, cfg.lambda) < cfg.cutoff);
    }
  }
}

TEST_CASE("tile table examples") {
  const GridSpec spec = unit_voxels(8);
  const FieldConfig cfg;
  const std::vector<Superquadric> inside = {sphere(Vec3(2, 2, 2), 0.3)};
  CHECK(build_tile_table(inside, spec, cfg, 4).pairs.size() == 1);

  const std::vector<Superquadric> outside = {sphere(Vec3(20, 2, 2), 0.3)};
  const auto none = build_tile_table(outside, spec, cfg, 4);
  CHECK(none.pairs.empty());
  CHECK(none.offsets.back() == 0);

  const std::vector<Superquadric> straddle = {sphere(Vec3(4, 2, 2), 0.6)};
  const auto two = build_tile_table(straddle, spec, cfg, 4);
  const auto expected = brute_tiles(spec, extent_bound(straddle[0], cfg), 4);
  REQUIRE(expected.size() == 2);
  REQUIRE(two.pairs.size() == 2);
  CHECK(two.pairs[0].tile == expected[0]);
  CHECK(two.pairs[1].tile == expected[1]);
}

TEST_CASE("tile table structure on random scenes") {
  std::mt19937_64 rng(9);
  const FieldConfig cfg;
  oracle::SceneRanges ranges;
  ranges.lo = Vec3::Constant(-1.0);
  ranges.hi = Vec3::Constant(11.0);
  ranges.scale_min = 0.2;
  ranges.scale_max = 1.5;
  GridSpec spec = unit_voxels(10);
  spec.resolution = {10, 9, 7};
  for (int t = 0; t < 10; ++t) {
    const auto scene = oracle::random_scene(rng, 30, 2, ranges);
    for (int ts : {1, 3, 4, 16}) {
      const auto table = build_tile_table(scene, spec, cfg, ts);
      CHECK(std::is_sorted(table.pairs.begin(), table.pairs.end()));
      CHECK(table.offsets.front() == 0);
      CHECK(table.offsets.back() == table.pairs.size());
      CHECK(table.offsets.size() == table.tile_count() + 1);
      for (std::size_t i = 0; i < scene.size(); ++i) {
        const auto want = brute_tiles(spec, extent_bound(scene[i], cfg), ts);
        std::vector<std::uint32_t> got;
        for (const TilePair& p : table.pairs) {
          if (p.primitive == i) got.push_back(p.tile);
        }
        CHECK(got == want);
      }
    }
  }
}

TEST_CASE("pair count never grows along nested tile sizes") {
  std::mt19937_64 rng(10);
  oracle::SceneRanges ranges;
  ranges.lo = Vec3::Constant(-2.0);
  ranges.hi = Vec3::Constant(2.0);
  const auto scene = oracle::random_scene(rng, 60, 2, ranges);
  const GridSpec spec = oracle::cube_grid(2.0, 24);
  // Holds along chains where each tile is a union of the smaller tiles;
  // unrelated sizes (5 vs 6, say) can align differently with a box.
  for (const auto& chain : {std::vector<int>{1, 2, 4, 8, 16, 32},
                            std::vector<int>{1, 3, 6, 12, 24}}) {
    std::size_t last = SIZE_MAX;
    for (int ts : chain) {
      const std::size_t n = build_tile_table(scene, spec, FieldConfig{}, ts).pairs.size();
      CHECK(n <= last);
      last = n;
    }
  }
}

TEST_CASE("naive splat matches direct evaluation") {
  const FieldConfig cfg;
  SUBCASE("empty scene") {
    const GridSpec spec = unit_voxels(4);
    const auto g = splat_naive({}, 3, spec, cfg);
    for (double p : g.occupancy) CHECK(p == 0.0);
    for (auto l : g.labels) CHECK(l == kEmptyLabel);
    CHECK(grids_identical(g, splat_tiled({}, 3, spec, cfg)));
  }
  SUBCASE("covering primitive") {
    const GridSpec spec = unit_voxels(4);
    const std::vector<Superquadric> big = {sphere(Vec3(2, 2, 2), 10.0, 3, 2)};
    const auto g = splat_naive(big, 3, spec, cfg);
    for (double p : g.occupancy) CHECK(p >= cfg.cutoff);
    for (auto l : g.labels) CHECK(l == 2);
  }
  SUBCASE("random scene") {
    std::mt19937_64 rng(11);
    oracle::SceneRanges ranges;
    ranges.lo = Vec3::Constant(-2.0);
    ranges.hi = Vec3::Constant(2.0);
    ranges.scale_min = 0.1;
    ranges.scale_max = 0.6;
    const auto scene = oracle::random_scene(rng, 100, 3, ranges);
    const GridSpec spec = oracle::cube_grid(2.0, 32);
    const auto g = splat_naive(scene, 3, spec, cfg);
    for (std::size_t v = 0; v < spec.voxel_count(); ++v) {
      const auto e = evaluate_point(spec.voxel_center(spec.unravel(v)), scene, 3, cfg);
      REQUIRE(g.occupancy[v] == e.p_occ);
      for (int k = 0; k < 3; ++k) REQUIRE(g.semantics_at(v)[k] == e.p_sem[k]);
      REQUIRE(g.labels[v] == voxel_label(e.p_occ, e.p_sem.data(), 3));
    }
  }
}

TEST_CASE("tiled splat is bit-identical to naive") {
  std::mt19937_64 rng(12);
  std::uniform_int_distribution<int> n_prims(1, 1000), n_grid(16, 64);
  const FieldConfig cfg;
  for (int t = 0; t < 100; ++t) {
    const int n = t < 90 ? n_prims(rng) % 120 + 1 : n_prims(rng);
    const int res = t < 90 ? 16 + (t % 3) * 8 : n_grid(rng);
    oracle::SceneRanges ranges;
    ranges.lo = Vec3::Constant(-3.0);
    ranges.hi = Vec3::Constant(3.0);
    ranges.scale_min = 0.05;
    ranges.scale_max = 0.5;
    const auto scene = oracle::random_scene(rng, n, 4, ranges);
    const GridSpec spec = oracle::cube_grid(3.0, res);
    SplatOptions opt;
    opt.tile_size = 1 + t % 6;
    const auto naive = splat_naive(scene, 4, spec, cfg, opt);
    const auto tiled = splat_tiled(scene, 4, spec, cfg, opt);
    REQUIRE(grids_identical(naive, tiled));
  }
  // One tile spanning the whole grid.
  const auto scene = oracle::random_scene(rng, 50, 2);
  const GridSpec spec = oracle::cube_grid(1.0, 16);
  SplatOptions whole;
  whole.tile_size = 16;
  CHECK(grids_identical(splat_naive(scene, 2, spec, cfg),
                        splat_tiled(scene, 2, spec, cfg, whole)));
}

TEST_CASE("splat output is independent of worker count") {
  std::mt19937_64 rng(13);
  oracle::SceneRanges ranges;
  ranges.scale_min = 0.1;
  ranges.scale_max = 0.4;
  const auto scene = oracle::random_scene(rng, 200, 3, ranges);
  const GridSpec spec = oracle::cube_grid(1.0, 24);
  SplatOptions one, many;
  one.workers = 1;
  many.workers = 7;
  const FieldConfig cfg;
  CHECK(grids_identical(splat_tiled(scene, 3, spec, cfg, one),
                        splat_tiled(scene, 3, spec, cfg, many)));
  CHECK(grids_identical(splat_naive(scene, 3, spec, cfg, one),
                        splat_naive(scene, 3, spec, cfg, many)));
}

TEST_CASE("splat rejects degenerate grids") {
  GridSpec bad = unit_voxels(4);
  bad.resolution = {4, 0, 4};
  CHECK_THROWS(splat_naive({}, 2, bad, FieldConfig{}));
  CHECK_THROWS(splat_tiled({}, 2, bad, FieldConfig{}));
}

TEST_CASE("bench report") {
  std::mt19937_64 rng(14);
  const auto scene = oracle::random_scene(rng, 20, 2);
  const GridSpec spec = oracle::cube_grid(1.0, 12);
  const auto r = bench_splat(scene, 2, spec, FieldConfig{}, 3);
  CHECK(r.repeats == 3);
  CHECK(r.naive.samples_ms.size() == 3);
  CHECK(r.tiled.samples_ms.size() == 3);
  CHECK(r.outputs_identical);
  CHECK(r.tile_pairs <= r.voxel_pairs);
  CHECK(r.speedup > 0.0);
  CHECK_THROWS(bench_splat(scene, 2, spec, FieldConfig{}, 2));
}
