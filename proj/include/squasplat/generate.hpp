#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "squasplat/grid.hpp"
#include "squasplat/io.hpp"

namespace squasplat {

// Seventeen semantic class names in the Occ3D order.
const std::vector<std::string>& default_class_names();

// 32^3 grid over [-8, 8]^3 (0.5 m voxels) used for fitting targets.
GridSpec fit_grid();

// Axis-aligned box snapped to the voxel lattice: voxels first[a] ..
// first[a] + count[a] - 1 along each axis, possibly partly outside the grid.
struct VoxelBox {
  Index3 first = {0, 0, 0};
  Index3 count = {0, 0, 0};
  std::uint16_t label = 0;
};

// Snaps the min corner of [center - extent/2, center + extent/2] down to a
// voxel boundary and covers ceil(extent / voxel) voxels per axis.
VoxelBox snap_box(const GridSpec& spec, const Vec3& center, const Vec3& extent,
                  std::uint16_t label);
// World-space [min, max] of a snapped box.
void box_bounds(const GridSpec& spec, const VoxelBox& box, Vec3& min, Vec3& max);

// Hard 0/1 grid (labels only) with every box voxel occupied. Earlier boxes
// win where boxes overlap.
VoxelGrid rasterize_boxes(const GridSpec& spec, int num_classes,
                          const std::vector<VoxelBox>& boxes);

struct GenOptions {
  std::string kind = "box";  // box, l-shape, random, ring
  std::uint64_t seed = 0;
  int num_classes = 17;
  std::optional<GridSpec> grid;  // default: fit_grid() for box and l-shape,
                                 // occ3d() otherwise
  Vec3 center = Vec3::Zero();
  // Box extent, or the first arm of the l-shape. Defaults: box (10, 10, 8),
  // arms (12, 4, 4) and (4, 12, 4) sharing their min corner.
  std::optional<Vec3> extent;
  std::optional<Vec3> extent_b;
  int label = 0;
  int label_b = 1;
  int count = 2400;                     // random and ring primitive count
  int members = 2;                      // ring cluster size
  double scale_min = 0.25;
  double scale_max = 1.0;
  double ring_radius = 20.0;

  void validate() const;
};

struct Generated {
  SceneDocument scene;
  std::optional<VoxelGrid> target;  // box and l-shape only
};

// Deterministic for fixed options. Throws std::invalid_argument for an
// unknown kind or invalid parameters.
Generated generate_scene(const GenOptions& options);

}  // namespace squasplat
