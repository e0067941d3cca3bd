#include <doctest.h>

#include "squasplat/generate.hpp"
#include "squasplat/io.hpp"

using namespace squasplat;

namespace {

std::size_t occupied(const VoxelGrid& g) {
  std::size_t n = 0;
  for (auto l : g.labels) n += l != kEmptyLabel;
  return n;
}

}  // namespace

TEST_CASE("box target voxel counts") {
  GenOptions o;
  o.kind = "box";
  o.extent = Vec3(4, 8, 2);
  const Generated g = generate_scene(o);
  REQUIRE(g.target);
  // 0.5 m voxels: 8 x 16 x 4.
  CHECK(occupied(*g.target) == 8 * 16 * 4);
  // Per-axis span of the occupied voxels.
  Index3 lo = {99, 99, 99}, hi = {-1, -1, -1};
  for (std::size_t v = 0; v < g.target->labels.size(); ++v) {
    if (g.target->labels[v] == kEmptyLabel) continue;
    const Index3 idx = g.target->spec.unravel(v);
    for (int a = 0; a < 3; ++a) {
      lo[a] = std::min(lo[a], idx[a]);
      hi[a] = std::max(hi[a], idx[a]);
    }
  }
  CHECK(hi[0] - lo[0] + 1 == 8);
  CHECK(hi[1] - lo[1] + 1 == 16);
  CHECK(hi[2] - lo[2] + 1 == 4);

  // The default box fills about a fifth of the fit grid.
  GenOptions d;
  const double frac = double(occupied(*generate_scene(d).target)) / (32 * 32 * 32);
  CHECK(frac == doctest::Approx(0.195).epsilon(0.01));

  // A non-multiple extent rounds up.
  o.extent = Vec3(1.2, 1.0, 0.4);
  CHECK(occupied(*generate_scene(o).target) == 3 * 2 * 1);
}

TEST_CASE("l-shape counts by inclusion-exclusion") {
  GenOptions o;
  o.kind = "l-shape";
  const Generated g = generate_scene(o);
  const GridSpec spec = g.scene.grid;
  std::vector<VoxelBox> boxes;
  for (const auto& sq : g.scene.superquadrics) {
    boxes.push_back(snap_box(spec, sq.center, 2.0 * sq.scale, 0));
  }
  REQUIRE(boxes.size() == 2);
  auto vol = [](const VoxelBox& b) { return std::size_t(b.count[0]) * b.count[1] * b.count[2]; };
  std::size_t overlap = 1;
  for (int a = 0; a < 3; ++a) {
    const int lo = std::max(boxes[0].first[a], boxes[1].first[a]);
    const int hi = std::min(boxes[0].first[a] + boxes[0].count[a],
                            boxes[1].first[a] + boxes[1].count[a]);
    overlap *= static_cast<std::size_t>(std::max(0, hi - lo));
  }
  CHECK(overlap > 0);
  CHECK(occupied(*g.target) == vol(boxes[0]) + vol(boxes[1]) - overlap);
}

TEST_CASE("random and ring scenes are deterministic") {
  GenOptions o;
  o.kind = "random";
  o.count = 300;
  o.seed = 7;
  const auto a = scene_to_string(generate_scene(o).scene);
  CHECK(a == scene_to_string(generate_scene(o).scene));
  o.seed = 8;
  CHECK(a != scene_to_string(generate_scene(o).scene));
  const Generated r = generate_scene(o);
  CHECK(r.scene.superquadrics.size() == 300);
  CHECK_FALSE(r.target);
  for (const auto& sq : r.scene.superquadrics) {
    CHECK((sq.center.array() >= r.scene.grid.lower.array()).all());
    CHECK((sq.center.array() <= r.scene.grid.upper.array()).all());
    CHECK(sq.scale.minCoeff() >= 0.25);
    CHECK(sq.scale.maxCoeff() <= 1.0);
  }

  o.kind = "ring";
  o.count = 12;
  o.members = 3;
  const Generated ring = generate_scene(o);
  CHECK(ring.scene.clusters.size() == 12);
  CHECK(ring.scene.clusters[0].members.size() == 3);
  CHECK(scene_to_string(ring.scene) == scene_to_string(generate_scene(o).scene));
}

TEST_CASE("generator argument errors") {
  GenOptions o;
  o.kind = "sphere";
  CHECK_THROWS_AS(generate_scene(o), std::invalid_argument);
  o = GenOptions{};
  o.label = 17;
  CHECK_THROWS_AS(generate_scene(o), std::invalid_argument);
  o = GenOptions{};
  o.extent = Vec3(1, 0, 1);
  CHECK_THROWS_AS(generate_scene(o), std::invalid_argument);
  o = GenOptions{};
  o.scale_min = 2.0;
  CHECK_THROWS_AS(generate_scene(o), std::invalid_argument);
}
