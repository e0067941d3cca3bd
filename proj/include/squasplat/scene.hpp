#pragma once

#include <numbers>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace squasplat {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Vec4 = Eigen::Vector4d;
using Mat3 = Eigen::Matrix3d;

// Squareness exponents outside this range are clamped by normalize().
struct EpsRange {
  double min = 0.1;
  double max = 2.0;
};

// Soft occupancy field parameters shared by evaluation and both splatters.
struct FieldConfig {
  double lambda = std::numbers::ln2;  // p_occ = 0.5 on the surface
  double cutoff = 0.01;               // contributions below this are zero

  void validate() const;
};

// One posed semantic superquadric. Rotation is a quaternion stored (w, x, y, z).
struct Superquadric {
  Vec3 center = Vec3::Zero();
  Vec4 rotation = Vec4(1.0, 0.0, 0.0, 0.0);
  Vec3 scale = Vec3::Ones();
  Vec2 eps = Vec2::Ones();
  double opacity = 1.0;
  std::vector<double> semantics;

  int num_classes() const { return static_cast<int>(semantics.size()); }
};

// Brings raw parameters onto the valid manifold: unit quaternion with w >= 0,
// clamped squareness, opacity in [0, 1], semantics on the simplex.
// Throws std::invalid_argument on non-finite or degenerate input.
// normalize(normalize(x)) == normalize(x) bit for bit.
Superquadric normalize(Superquadric sq, const EpsRange& range = {});

struct ClusterMember {
  Vec3 offset = Vec3::Zero();
  Vec4 rotation = Vec4(1.0, 0.0, 0.0, 0.0);
  Vec3 scale = Vec3::Ones();
  Vec2 eps = Vec2::Ones();
  double opacity = 1.0;
};

// K superquadrics anchored at a shared reference point with one shared
// semantics vector.
struct SuperquadricCluster {
  Vec3 ref_point = Vec3::Zero();
  std::vector<ClusterMember> members;
  std::vector<double> semantics;

  int size() const { return static_cast<int>(members.size()); }
};

std::vector<Superquadric> expand_cluster(const SuperquadricCluster& cluster);

// Expands every cluster in order and concatenates the results.
std::vector<Superquadric> expand_clusters(
    const std::vector<SuperquadricCluster>& clusters);

// Quaternion helpers, all in (w, x, y, z) order.
Vec4 quat_multiply(const Vec4& a, const Vec4& b);
Vec4 quat_canonical(const Vec4& q);  // unit length with w >= 0
Vec4 quat_from_matrix(const Mat3& rotation);
Vec4 quat_from_axis_angle(const Vec3& axis, double angle);

// Rotation matrix of q / |q|; q need not be unit length but must be nonzero.
Mat3 rotation_matrix(const Vec4& q);

std::vector<double> one_hot(int num_classes, int k);
std::vector<double> uniform_semantics(int num_classes);

}  // namespace squasplat
