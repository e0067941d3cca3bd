#include "squasplat/field.hpp"

#include <cmath>
#include <stdexcept>

namespace squasplat {
namespace {

double inside_outside_scaled(const Vec3& local, const Vec3& inv_scale,
                             double exp_xy, double exp_ratio, double exp_z) {
  const double x = abs_pow(local.x() * inv_scale.x(), exp_xy);
  const double y = abs_pow(local.y() * inv_scale.y(), exp_xy);
  const double z = abs_pow(local.z() * inv_scale.z(), exp_z);
  return abs_pow(x + y, exp_ratio) + z;
}

}  // namespace

Vec3 local_coords(const Vec3& p, const Superquadric& sq) {
  return rotation_matrix(sq.rotation).transpose() * (p - sq.center);
}

double abs_pow(double v, double e) {
  const double a = std::abs(v);
  if (a == 0.0) return 0.0;
  return std::exp(e * std::log(a));
}

double inside_outside(const Vec3& local, const Vec3& scale, const Vec2& eps) {
  return inside_outside_scaled(local, scale.cwiseInverse(), 2.0 / eps[1],
                               eps[1] / eps[0], 2.0 / eps[0]);
}

double point_occupancy(const Vec3& p, const Superquadric& sq,
                       const FieldConfig& cfg, Cutoff mode) {
  const double f = inside_outside(local_coords(p, sq), sq.scale, sq.eps);
  const double v = std::exp(-cfg.lambda * f);
  if (mode == Cutoff::kApply && v < cfg.cutoff) return 0.0;
  return v;
}

double combine_occupancy(std::span<const double> contributions) {
  double transmittance = 1.0;
  for (double p : contributions) transmittance *= (1.0 - p);
  return 1.0 - transmittance;
}

std::vector<double> aggregate_semantics(
    std::span<const SemanticContribution> contributions, int num_classes) {
  std::vector<double> numerator(static_cast<std::size_t>(num_classes), 0.0);
  double denominator = 0.0;
  for (const auto& c : contributions) {
    const double w = c.occupancy * c.opacity;
    denominator += w;
    for (int k = 0; k < num_classes; ++k) numerator[k] += w * c.semantics[k];
  }
  if (denominator < kSemanticDenominatorFloor) {
    return uniform_semantics(num_classes);
  }
  for (double& v : numerator) v /= denominator;
  return numerator;
}

PointEval evaluate_point(const Vec3& p, std::span<const Superquadric> scene,
                         int num_classes, const FieldConfig& cfg,
                         Cutoff mode) {
  PointEval out;
  out.p_sem.resize(static_cast<std::size_t>(num_classes));
  if (mode == Cutoff::kApply) {
    PointAccumulator acc(num_classes);
    for (const Superquadric& sq : scene) {
      const PreparedPrimitive prim = prepare(sq, cfg);
      const double v = contribution(prim, p, cfg);
      if (v > 0.0) acc.add(v, prim);
    }
    out.p_occ = acc.occupancy();
    acc.semantics(out.p_sem.data());
  } else {
    std::vector<double> occ;
    std::vector<SemanticContribution> sem;
    occ.reserve(scene.size());
    for (const Superquadric& sq : scene) {
      occ.push_back(point_occupancy(p, sq, cfg, Cutoff::kNone));
      sem.push_back({occ.back(), sq.opacity, sq.semantics});
    }
    out.p_occ = combine_occupancy(occ);
    out.p_sem = aggregate_semantics(sem, num_classes);
  }
  out.o_vec.resize(out.p_sem.size() + 1);
  for (std::size_t k = 0; k < out.p_sem.size(); ++k) {
    out.o_vec[k] = out.p_occ * out.p_sem[k];
  }
  out.o_vec.back() = 1.0 - out.p_occ;
  return out;
}

Vec3 local_extent(const Superquadric& sq, const FieldConfig& cfg) {
  // Single-axis level set of the cutoff: f <= F with F = ln(1/t) / lambda.
  const double level = std::log(1.0 / cfg.cutoff) / cfg.lambda;
  const double along_z = std::pow(level, 0.5 * sq.eps[0]);
  const double along_xy = std::max(along_z, std::pow(level, 0.5 * sq.eps[1]));
  return Vec3(sq.scale.x() * along_xy, sq.scale.y() * along_xy,
              sq.scale.z() * along_z);
}

Aabb extent_bound(const Superquadric& sq, const FieldConfig& cfg) {
  const Vec3 e = local_extent(sq, cfg);
  const Vec3 half = rotation_matrix(sq.rotation).cwiseAbs() * e;
  return {sq.center - half, sq.center + half};
}

PreparedPrimitive prepare(const Superquadric& sq, const FieldConfig& cfg) {
  PreparedPrimitive prim;
  prim.rotation = rotation_matrix(sq.rotation);
  prim.quaternion = sq.rotation;
  prim.center = sq.center;
  prim.scale = sq.scale;
  prim.inv_scale = sq.scale.cwiseInverse();
  prim.eps = sq.eps;
  prim.exp_xy = 2.0 / sq.eps[1];
  prim.exp_ratio = sq.eps[1] / sq.eps[0];
  prim.exp_z = 2.0 / sq.eps[0];
  prim.half_extent = local_extent(sq, cfg);
  const Vec3 half = prim.rotation.cwiseAbs() * prim.half_extent;
  prim.bounds = {sq.center - half, sq.center + half};
  prim.opacity = sq.opacity;
  prim.semantics = sq.semantics.data();
  return prim;
}

std::vector<PreparedPrimitive> prepare_all(std::span<const Superquadric> scene,
                                           const FieldConfig& cfg) {
  std::vector<PreparedPrimitive> out;
  out.reserve(scene.size());
  for (const auto& sq : scene) out.push_back(prepare(sq, cfg));
  return out;
}

double contribution(const PreparedPrimitive& prim, const Vec3& p,
                    const FieldConfig& cfg) {
  if (!prim.bounds.contains(p)) return 0.0;
  const Vec3 local = prim.rotation.transpose() * (p - prim.center);
  if (std::abs(local.x()) > prim.half_extent.x() ||
      std::abs(local.y()) > prim.half_extent.y() ||
      std::abs(local.z()) > prim.half_extent.z()) {
    return 0.0;
  }
  const double f = inside_outside_scaled(local, prim.inv_scale, prim.exp_xy,
                                         prim.exp_ratio, prim.exp_z);
  const double v = std::exp(-cfg.lambda * f);
  return v < cfg.cutoff ? 0.0 : v;
}

PointAccumulator::PointAccumulator(int num_classes)
    : num_classes_(num_classes),
      numerator_(static_cast<std::size_t>(num_classes), 0.0) {}

void PointAccumulator::reset() {
  transmittance_ = 1.0;
  weight_ = 0.0;
  std::fill(numerator_.begin(), numerator_.end(), 0.0);
}

void PointAccumulator::add(double occupancy, const PreparedPrimitive& prim) {
  transmittance_ *= (1.0 - occupancy);
  const double w = occupancy * prim.opacity;
  weight_ += w;
  for (int k = 0; k < num_classes_; ++k) {
    numerator_[k] += w * prim.semantics[k];
  }
}

void PointAccumulator::semantics(double* out) const {
  if (weight_ < kSemanticDenominatorFloor) {
    for (int k = 0; k < num_classes_; ++k) out[k] = 1.0 / num_classes_;
    return;
  }
  for (int k = 0; k < num_classes_; ++k) out[k] = numerator_[k] / weight_;
}

}  // namespace squasplat
