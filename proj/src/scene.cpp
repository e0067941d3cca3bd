#include "squasplat/scene.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include <Eigen/Geometry>

namespace squasplat {
namespace {

bool all_finite(const Eigen::Ref<const Eigen::VectorXd>& v) {
  return v.allFinite();
}

void require(bool ok, const std::string& what) {
  if (!ok) throw std::invalid_argument("superquadric: " + what);
}

}  // namespace

void FieldConfig::validate() const {
  if (!(lambda > 0.0) || !std::isfinite(lambda)) {
    throw std::invalid_argument("field config: lambda must be positive");
  }
  if (!(cutoff > 0.0 && cutoff < 1.0)) {
    throw std::invalid_argument("field config: cutoff must lie in (0, 1)");
  }
}

Superquadric normalize(Superquadric sq, const EpsRange& range) {
  require(all_finite(sq.center), "non-finite center");
  require(all_finite(sq.rotation), "non-finite rotation");
  require(all_finite(sq.scale), "non-finite scale");
  require(all_finite(sq.eps), "non-finite squareness");
  require(std::isfinite(sq.opacity), "non-finite opacity");
  require(!sq.semantics.empty(), "empty semantics vector");
  require((sq.scale.array() > 0.0).all(), "scale must be positive");

  const double norm = sq.rotation.norm();
  require(norm > 0.0, "zero quaternion");
  // Leave already-unit quaternions untouched so repeated calls are exact.
  if (std::abs(norm - 1.0) > 1e-12) sq.rotation /= norm;
  if (sq.rotation[0] < 0.0) sq.rotation = -sq.rotation;

  for (int a = 0; a < 2; ++a) {
    sq.eps[a] = std::clamp(sq.eps[a], range.min, range.max);
  }
  sq.opacity = std::clamp(sq.opacity, 0.0, 1.0);

  double sum = 0.0;
  for (double c : sq.semantics) {
    require(std::isfinite(c), "non-finite semantics");
    require(c >= 0.0, "negative class probability");
    sum += c;
  }
  require(sum > 0.0, "semantics sum to zero");
  if (std::abs(sum - 1.0) > 1e-12) {
    for (double& c : sq.semantics) c /= sum;
  }
  return sq;
}

std::vector<Superquadric> expand_cluster(const SuperquadricCluster& cluster) {
  std::vector<Superquadric> out;
  out.reserve(cluster.members.size());
  for (const ClusterMember& member : cluster.members) {
    Superquadric sq;
    sq.center = cluster.ref_point + member.offset;
    sq.rotation = member.rotation;
    sq.scale = member.scale;
    sq.eps = member.eps;
    sq.opacity = member.opacity;
    sq.semantics = cluster.semantics;
    out.push_back(std::move(sq));
  }
  return out;
}

std::vector<Superquadric> expand_clusters(
    const std::vector<SuperquadricCluster>& clusters) {
  std::vector<Superquadric> out;
  for (const auto& cluster : clusters) {
    auto members = expand_cluster(cluster);
    out.insert(out.end(), std::make_move_iterator(members.begin()),
               std::make_move_iterator(members.end()));
  }
  return out;
}

Vec4 quat_multiply(const Vec4& a, const Vec4& b) {
  return Vec4(a[0] * b[0] - a[1] * b[1] - a[2] * b[2] - a[3] * b[3],
              a[0] * b[1] + a[1] * b[0] + a[2] * b[3] - a[3] * b[2],
              a[0] * b[2] - a[1] * b[3] + a[2] * b[0] + a[3] * b[1],
              a[0] * b[3] + a[1] * b[2] - a[2] * b[1] + a[3] * b[0]);
}

Vec4 quat_canonical(const Vec4& q) {
  Vec4 out = q / q.norm();
  if (out[0] < 0.0) out = -out;
  return out;
}

Vec4 quat_from_matrix(const Mat3& rotation) {
  Eigen::Quaterniond q(rotation);
  return quat_canonical(Vec4(q.w(), q.x(), q.y(), q.z()));
}

Vec4 quat_from_axis_angle(const Vec3& axis, double angle) {
  const Vec3 n = axis.normalized();
  const double h = 0.5 * angle;
  return Vec4(std::cos(h), n.x() * std::sin(h), n.y() * std::sin(h),
              n.z() * std::sin(h));
}

Mat3 rotation_matrix(const Vec4& q) {
  const double w = q[0], x = q[1], y = q[2], z = q[3];
  const double s = 2.0 / q.squaredNorm();
  Mat3 r;
  r << 1.0 - s * (y * y + z * z), s * (x * y - w * z), s * (x * z + w * y),
      s * (x * y + w * z), 1.0 - s * (x * x + z * z), s * (y * z - w * x),
      s * (x * z - w * y), s * (y * z + w * x), 1.0 - s * (x * x + y * y);
  return r;
}

std::vector<double> one_hot(int num_classes, int k) {
  std::vector<double> c(static_cast<std::size_t>(num_classes), 0.0);
  c.at(static_cast<std::size_t>(k)) = 1.0;
  return c;
}

std::vector<double> uniform_semantics(int num_classes) {
  return std::vector<double>(static_cast<std::size_t>(num_classes),
                             1.0 / num_classes);
}

}  // namespace squasplat
