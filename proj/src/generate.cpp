#include "squasplat/generate.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

#include "squasplat/random.hpp"

namespace squasplat {

namespace {

// Voxel count along one axis for an extent; the small slack keeps exact
// multiples of the voxel size from rounding up.
int voxel_span(double extent, double voxel) {
  return static_cast<int>(std::ceil(extent / voxel - 1e-9));
}

Superquadric box_primitive(const GridSpec& spec, const VoxelBox& box,
                           int num_classes) {
  Vec3 lo, hi;
  box_bounds(spec, box, lo, hi);
  Superquadric sq;
  sq.center = 0.5 * (lo + hi);
  sq.scale = 0.5 * (hi - lo);
  sq.eps = Vec2(0.1, 0.1);
  sq.opacity = 1.0;
  sq.semantics = one_hot(num_classes, box.label);
  return sq;
}

SceneDocument base_document(const GenOptions& o, const GridSpec& spec) {
  SceneDocument doc;
  doc.grid = spec;
  doc.num_classes = o.num_classes;
  const auto& names = default_class_names();
  for (int c = 0; c < o.num_classes; ++c) {
    doc.class_names.push_back(c < static_cast<int>(names.size())
                                  ? names[static_cast<std::size_t>(c)]
                                  : "class_" + std::to_string(c));
  }
  return doc;
}

Superquadric random_primitive(CounterRng& rng, const GridSpec& spec,
                              const GenOptions& o) {
  Superquadric sq;
  for (int a = 0; a < 3; ++a) {
    sq.center[a] = rng.uniform(spec.lower[a], spec.upper[a]);
    sq.scale[a] = rng.uniform(o.scale_min, o.scale_max);
  }
  sq.rotation = rng.unit_quaternion();
  sq.eps = Vec2(rng.uniform(0.3, 1.5), rng.uniform(0.3, 1.5));
  sq.opacity = rng.uniform(0.5, 1.0);
  sq.semantics = one_hot(o.num_classes, static_cast<int>(rng.below(
                                            static_cast<std::uint64_t>(o.num_classes))));
  return sq;
}

SuperquadricCluster ring_cluster(CounterRng& rng, const GridSpec& spec,
                                 const GenOptions& o, int i) {
  const double angle = 2.0 * std::numbers::pi * i / o.count;
  const double r = o.ring_radius + rng.uniform(-1.0, 1.0);
  SuperquadricCluster c;
  c.ref_point = o.center + Vec3(r * std::cos(angle), r * std::sin(angle),
                                0.5 * (spec.lower.z() + spec.upper.z()) -
                                    o.center.z());
  c.semantics = one_hot(o.num_classes, static_cast<int>(rng.below(
                                           static_cast<std::uint64_t>(o.num_classes))));
  for (int k = 0; k < o.members; ++k) {
    ClusterMember m;
    m.offset = Vec3(rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5),
                    rng.uniform(-0.25, 0.25));
    m.rotation = quat_from_axis_angle(Vec3::UnitZ(),
                                      rng.uniform(0.0, 2.0 * std::numbers::pi));
    for (int a = 0; a < 3; ++a) m.scale[a] = rng.uniform(o.scale_min, o.scale_max);
    m.eps = Vec2(rng.uniform(0.3, 1.5), rng.uniform(0.3, 1.5));
    m.opacity = rng.uniform(0.5, 1.0);
    c.members.push_back(m);
  }
  return c;
}

}  // namespace

const std::vector<std::string>& default_class_names() {
  static const std::vector<std::string> names = {
      "others",       "barrier",     "bicycle",  "bus",
      "car",          "construction_vehicle",    "motorcycle",
      "pedestrian",   "traffic_cone", "trailer", "truck",
      "driveable_surface", "other_flat", "sidewalk", "terrain",
      "manmade",      "vegetation"};
  return names;
}

GridSpec fit_grid() {
  GridSpec g;
  g.lower = Vec3::Constant(-8.0);
  g.upper = Vec3::Constant(8.0);
  g.resolution = {32, 32, 32};
  return g;
}

VoxelBox snap_box(const GridSpec& spec, const Vec3& center, const Vec3& extent,
                  std::uint16_t label) {
  const Vec3 size = spec.voxel_size();
  VoxelBox box;
  box.label = label;
  for (int a = 0; a < 3; ++a) {
    const double lo = center[a] - 0.5 * extent[a];
    box.first[a] = static_cast<int>(
        std::floor((lo - spec.lower[a]) / size[a] + 1e-9));
    box.count[a] = voxel_span(extent[a], size[a]);
  }
  return box;
}

void box_bounds(const GridSpec& spec, const VoxelBox& box, Vec3& min,
                Vec3& max) {
  const Vec3 size = spec.voxel_size();
  for (int a = 0; a < 3; ++a) {
    min[a] = spec.lower[a] + box.first[a] * size[a];
    max[a] = spec.lower[a] + (box.first[a] + box.count[a]) * size[a];
  }
}

VoxelGrid rasterize_boxes(const GridSpec& spec, int num_classes,
                          const std::vector<VoxelBox>& boxes) {
  VoxelGrid grid(spec, num_classes, false);
  for (const VoxelBox& box : boxes) {
    Index3 lo, hi;
    for (int a = 0; a < 3; ++a) {
      lo[a] = std::max(box.first[a], 0);
      hi[a] = std::min(box.first[a] + box.count[a], spec.resolution[a]);
    }
    for (int k = lo[2]; k < hi[2]; ++k) {
      for (int j = lo[1]; j < hi[1]; ++j) {
        for (int i = lo[0]; i < hi[0]; ++i) {
          const std::size_t v = spec.linear_index(i, j, k);
          if (grid.labels[v] != kEmptyLabel) continue;
          grid.occupancy[v] = 1.0;
          grid.labels[v] = box.label;
        }
      }
    }
  }
  return grid;
}

void GenOptions::validate() const {
  if (kind != "box" && kind != "l-shape" && kind != "random" && kind != "ring") {
    throw std::invalid_argument("unknown scene kind '" + kind + "'");
  }
  if (num_classes < 1 || num_classes >= kEmptyLabel) {
    throw std::invalid_argument("class count out of range");
  }
  if (label < 0 || label >= num_classes || label_b < 0 || label_b >= num_classes) {
    throw std::invalid_argument("label out of range");
  }
  for (const auto& e : {extent, extent_b}) {
    if (e && !(e->minCoeff() > 0.0)) {
      throw std::invalid_argument("extent must be positive");
    }
  }
  if (count < 0) throw std::invalid_argument("count must be non-negative");
  if (members < 1) throw std::invalid_argument("members must be >= 1");
  if (!(scale_min > 0.0 && scale_max >= scale_min)) {
    throw std::invalid_argument("need 0 < scale_min <= scale_max");
  }
  if (grid) grid->validate();
}

Generated generate_scene(const GenOptions& o) {
  o.validate();
  const bool boxy = o.kind == "box" || o.kind == "l-shape";
  const GridSpec spec = o.grid ? *o.grid : (boxy ? fit_grid() : GridSpec::occ3d());
  Generated out;
  out.scene = base_document(o, spec);
  const auto label_a = static_cast<std::uint16_t>(o.label);
  const auto label_b = static_cast<std::uint16_t>(o.label_b);

  if (o.kind == "box") {
    const VoxelBox box =
        snap_box(spec, o.center, o.extent.value_or(Vec3(10.0, 10.0, 8.0)), label_a);
    out.scene.superquadrics.push_back(box_primitive(spec, box, o.num_classes));
    out.target = rasterize_boxes(spec, o.num_classes, {box});
  } else if (o.kind == "l-shape") {
    const Vec3 ea = o.extent.value_or(Vec3(12.0, 4.0, 4.0));
    const Vec3 eb = o.extent_b.value_or(Vec3(4.0, 12.0, 4.0));
    const Vec3 hull = ea.cwiseMax(eb);
    const Vec3 corner = o.center - 0.5 * hull;
    const VoxelBox a = snap_box(spec, corner + 0.5 * ea, ea, label_a);
    VoxelBox b = snap_box(spec, corner + 0.5 * eb, eb, label_b);
    b.first = a.first;  // shared min corner, immune to rounding
    out.scene.superquadrics.push_back(box_primitive(spec, a, o.num_classes));
    out.scene.superquadrics.push_back(box_primitive(spec, b, o.num_classes));
    out.target = rasterize_boxes(spec, o.num_classes, {a, b});
  } else if (o.kind == "random") {
    CounterRng rng(derive_seed(o.seed, 0x7261));
    for (int i = 0; i < o.count; ++i) {
      out.scene.superquadrics.push_back(random_primitive(rng, spec, o));
    }
  } else {
    CounterRng rng(derive_seed(o.seed, 0x7269));
    for (int i = 0; i < o.count; ++i) {
      out.scene.clusters.push_back(ring_cluster(rng, spec, o, i));
    }
  }
  for (auto& sq : out.scene.superquadrics) sq = normalize(sq);
  return out;
}

}  // namespace squasplat
