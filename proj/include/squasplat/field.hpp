#pragma once

#include <span>
#include <vector>

#include "squasplat/scene.hpp"

namespace squasplat {

// Whether contributions below FieldConfig::cutoff are zeroed.
enum class Cutoff { kNone, kApply };

// Denominators of the semantic aggregation below this fall back to the
// uniform class distribution.
inline constexpr double kSemanticDenominatorFloor = 1e-12;

struct Aabb {
  Vec3 min = Vec3::Zero();
  Vec3 max = Vec3::Zero();

  bool contains(const Vec3& p) const {
    return p.x() >= min.x() && p.x() <= max.x() && p.y() >= min.y() &&
           p.y() <= max.y() && p.z() >= min.z() && p.z() <= max.z();
  }
};

struct PointEval {
  double p_occ = 0.0;
  std::vector<double> p_sem;  // C entries
  std::vector<double> o_vec;  // C + 1 entries, the last is the empty class
};

// p' = R^T (p - m).
Vec3 local_coords(const Vec3& p, const Superquadric& sq);

// |v|^e computed as exp(e * ln|v|), with |v| == 0 mapped to 0.
double abs_pow(double v, double e);

// Inside-outside value of a local point; 1 on the surface.
double inside_outside(const Vec3& local, const Vec3& scale, const Vec2& eps);

double point_occupancy(const Vec3& p, const Superquadric& sq,
                       const FieldConfig& cfg, Cutoff mode = Cutoff::kNone);

// 1 - prod(1 - p_i); 0 for an empty list.
double combine_occupancy(std::span<const double> contributions);

struct SemanticContribution {
  double occupancy = 0.0;
  double opacity = 0.0;
  std::span<const double> semantics;
};

std::vector<double> aggregate_semantics(
    std::span<const SemanticContribution> contributions, int num_classes);

// Full per-point composition over a scene, contributions combined in list
// order. Bit-identical to what both splatters write for a voxel center.
PointEval evaluate_point(const Vec3& p, std::span<const Superquadric> scene,
                         int num_classes, const FieldConfig& cfg,
                         Cutoff mode = Cutoff::kApply);

// Conservative world box holding every point with occupancy >= cutoff.
Aabb extent_bound(const Superquadric& sq, const FieldConfig& cfg);

// Local half extents behind extent_bound().
Vec3 local_extent(const Superquadric& sq, const FieldConfig& cfg);

// Per-primitive values precomputed once per splat.
struct PreparedPrimitive {
  Mat3 rotation;
  Vec4 quaternion;
  Vec3 center;
  Vec3 scale;
  Vec3 inv_scale;
  Vec2 eps;
  double exp_xy = 1.0;     // 2 / eps2
  double exp_ratio = 1.0;  // eps2 / eps1
  double exp_z = 1.0;      // 2 / eps1
  Vec3 half_extent;
  Aabb bounds;
  double opacity = 1.0;
  const double* semantics = nullptr;
};

PreparedPrimitive prepare(const Superquadric& sq, const FieldConfig& cfg);
std::vector<PreparedPrimitive> prepare_all(std::span<const Superquadric> scene,
                                           const FieldConfig& cfg);

// Occupancy of one prepared primitive at p with the cutoff applied; 0 when
// p lies outside the primitive's bound.
double contribution(const PreparedPrimitive& prim, const Vec3& p,
                    const FieldConfig& cfg);

// Occupancy and semantic combination for one point, fed in ascending id
// order.
class PointAccumulator {
 public:
  explicit PointAccumulator(int num_classes);

  void reset();
  void add(double occupancy, const PreparedPrimitive& prim);

  double occupancy() const { return 1.0 - transmittance_; }
  // Writes num_classes probabilities.
  void semantics(double* out) const;

 private:
  int num_classes_;
  double transmittance_ = 1.0;
  double weight_ = 0.0;
  std::vector<double> numerator_;
};

}  // namespace squasplat
