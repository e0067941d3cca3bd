#pragma once

#include <span>
#include <vector>

#include "squasplat/field.hpp"
#include "squasplat/grid.hpp"
#include "squasplat/splat.hpp"

namespace squasplat {

// Upstream gradient of a scalar loss with respect to a splatted grid.
// Either `occupancy` (N) plus `semantics` (N * C) are filled, or `o_vec`
// (N * (C + 1), voxel-major, empty class last) is. Empty vectors mean zero.
struct GridGradient {
  std::vector<double> occupancy;
  std::vector<double> semantics;
  std::vector<double> o_vec;
};

// Gradient with respect to every raw parameter of one primitive. The
// rotation entry is with respect to the stored (possibly non-unit)
// quaternion, which the field normalizes.
struct SuperquadricGradient {
  Vec3 center = Vec3::Zero();
  Vec4 rotation = Vec4::Zero();
  Vec3 scale = Vec3::Zero();
  Vec2 eps = Vec2::Zero();
  double opacity = 0.0;
  std::vector<double> semantics;
};

// Occupancy of one primitive at p (cutoff applied) and its derivatives.
struct ContributionGradient {
  double value = 0.0;
  Vec3 center = Vec3::Zero();
  Vec4 rotation = Vec4::Zero();
  Vec3 scale = Vec3::Zero();
  Vec2 eps = Vec2::Zero();
};

ContributionGradient contribution_gradient(const PreparedPrimitive& prim,
                                           const Vec3& p,
                                           const FieldConfig& cfg);

// Backpropagates `upstream` through the tile-binned splat. Per-primitive
// sums are reduced in ascending tile order, independent of worker count.
std::vector<SuperquadricGradient> splat_backward(
    std::span<const Superquadric> scene, int num_classes,
    const GridSpec& spec, const FieldConfig& cfg, const GridGradient& upstream,
    const SplatOptions& options = {});

}  // namespace squasplat
