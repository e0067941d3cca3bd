#pragma once

// Independent reference implementations used by the unit tests and the
// acceptance binary. Everything here is written directly from the defining
// formulas with std::pow and plain loops, and shares no code with the
// library beyond its data types.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <set>
#include <tuple>
#include <utility>
#include <vector>

#include "squasplat/fit.hpp"
#include "squasplat/grid.hpp"
#include "squasplat/metrics.hpp"
#include "squasplat/scene.hpp"
#include "squasplat/splat.hpp"
#include "squasplat/temporal.hpp"

namespace oracle {

using squasplat::Vec2;
using squasplat::Vec3;
using squasplat::Vec4;
using squasplat::Mat3;

// ---------------------------------------------------------------- field --

inline Mat3 quat_to_matrix(const Vec4& q_raw) {
  const Vec4 q = q_raw / q_raw.norm();
  const double w = q[0], x = q[1], y = q[2], z = q[3];
  Mat3 r;
  r << 1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y),
      2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x),
      2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y);
  return r;
}

inline double occupancy(const Vec3& p, const squasplat::Superquadric& sq,
                        double lambda) {
  const Vec3 l = quat_to_matrix(sq.rotation).transpose() * (p - sq.center);
  const double e1 = sq.eps[0], e2 = sq.eps[1];
  const double ax = std::pow(std::abs(l.x()) / sq.scale.x(), 2.0 / e2);
  const double ay = std::pow(std::abs(l.y()) / sq.scale.y(), 2.0 / e2);
  const double az = std::pow(std::abs(l.z()) / sq.scale.z(), 2.0 / e1);
  const double f = std::pow(ax + ay, e2 / e1) + az;
  return std::exp(-lambda * f);
}

struct Eval {
  double p_occ = 0.0;
  std::vector<double> p_sem;
  std::vector<double> o_vec;
};

// Literal composition without any cutoff.
inline Eval evaluate(const Vec3& p,
                     const std::vector<squasplat::Superquadric>& scene,
                     int num_classes, double lambda) {
  Eval e;
  double prod = 1.0;
  std::vector<double> num(static_cast<std::size_t>(num_classes), 0.0);
  double den = 0.0;
  for (const auto& sq : scene) {
    const double pi = occupancy(p, sq, lambda);
    prod *= 1.0 - pi;
    for (int c = 0; c < num_classes; ++c) num[c] += pi * sq.opacity * sq.semantics[c];
    den += pi * sq.opacity;
  }
  e.p_occ = 1.0 - prod;
  e.p_sem.assign(static_cast<std::size_t>(num_classes), 1.0 / num_classes);
  if (den >= 1e-12) {
    for (int c = 0; c < num_classes; ++c) e.p_sem[c] = num[c] / den;
  }
  for (double s : e.p_sem) e.o_vec.push_back(e.p_occ * s);
  e.o_vec.push_back(1.0 - e.p_occ);
  return e;
}

// ------------------------------------------------------------- scenes --

inline Vec4 random_quaternion(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Vec4 q(n(rng), n(rng), n(rng), n(rng));
  q /= q.norm();
  if (q[0] < 0) q = -q;
  return q;
}

inline std::vector<double> random_simplex(std::mt19937_64& rng, int c) {
  std::exponential_distribution<double> ex(1.0);
  std::vector<double> v(static_cast<std::size_t>(c));
  double s = 0.0;
  for (double& x : v) s += (x = ex(rng) + 1e-3);
  for (double& x : v) x /= s;
  return v;
}

struct SceneRanges {
  Vec3 lo = Vec3::Constant(-1.0), hi = Vec3::Constant(1.0);
  double scale_min = 0.3, scale_max = 1.0;
  double eps_min = 0.4, eps_max = 1.6;
};

inline squasplat::Superquadric random_primitive(std::mt19937_64& rng, int c,
                                                const SceneRanges& r = {}) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  auto in = [&](double a, double b) { return a + (b - a) * u(rng); };
  squasplat::Superquadric sq;
  for (int a = 0; a < 3; ++a) {
    sq.center[a] = in(r.lo[a], r.hi[a]);
    sq.scale[a] = in(r.scale_min, r.scale_max);
  }
  sq.rotation = random_quaternion(rng);
  sq.eps = Vec2(in(r.eps_min, r.eps_max), in(r.eps_min, r.eps_max));
  sq.opacity = in(0.3, 1.0);
  sq.semantics = random_simplex(rng, c);
  return sq;
}

inline std::vector<squasplat::Superquadric> random_scene(
    std::mt19937_64& rng, int n, int c, const SceneRanges& r = {}) {
  std::vector<squasplat::Superquadric> s;
  for (int i = 0; i < n; ++i) s.push_back(random_primitive(rng, c, r));
  return s;
}

inline squasplat::GridSpec cube_grid(double half, int n) {
  squasplat::GridSpec g;
  g.lower = Vec3::Constant(-half);
  g.upper = Vec3::Constant(half);
  g.resolution = {n, n, n};
  return g;
}

// --------------------------------------------------------- gradients --

// Scalar objective sum_v sum_k w[v][k] * o_vec[v][k] of a splat, summed in
// long double so finite differences see as little rounding as possible.
inline long double weighted_objective(
    const std::vector<squasplat::Superquadric>& scene, int c,
    const squasplat::GridSpec& spec, const squasplat::FieldConfig& cfg,
    const std::vector<double>& w) {
  squasplat::SplatOptions opt;
  opt.workers = 1;
  const auto g = squasplat::splat_naive(scene, c, spec, cfg, opt);
  long double total = 0.0L;
  const std::size_t stride = static_cast<std::size_t>(c) + 1;
  for (std::size_t v = 0; v < g.occupancy.size(); ++v) {
    const double po = g.occupancy[v];
    for (int k = 0; k < c; ++k) {
      total += static_cast<long double>(w[v * stride + k]) * (po * g.semantics[v * c + k]);
    }
    total += static_cast<long double>(w[v * stride + c]) * (1.0 - po);
  }
  return total;
}

// Pointer to the n-th raw scalar parameter of a primitive in the order
// center(3), rotation(4), scale(3), eps(2), opacity(1), semantics(C).
inline double* parameter(squasplat::Superquadric& sq, int n) {
  if (n < 3) return &sq.center[n];
  if (n < 7) return &sq.rotation[n - 3];
  if (n < 10) return &sq.scale[n - 7];
  if (n < 12) return &sq.eps[n - 10];
  if (n == 12) return &sq.opacity;
  return &sq.semantics[static_cast<std::size_t>(n - 13)];
}

inline double analytic(const squasplat::SuperquadricGradient& g, int n) {
  if (n < 3) return g.center[n];
  if (n < 7) return g.rotation[n - 3];
  if (n < 10) return g.scale[n - 7];
  if (n < 12) return g.eps[n - 10];
  if (n == 12) return g.opacity;
  return g.semantics[static_cast<std::size_t>(n - 13)];
}

// Signs of the local coordinates of p along the axes where |x|^e has
// e < 2, i.e. where the field is only once differentiable at x = 0.
inline int kink_signs(const Vec3& p, const squasplat::Superquadric& sq) {
  const Vec3 l = quat_to_matrix(sq.rotation).transpose() * (p - sq.center);
  const bool rough[3] = {sq.eps[1] > 1.0, sq.eps[1] > 1.0, sq.eps[0] > 1.0};
  int mask = 0;
  for (int a = 0; a < 3; ++a) {
    if (rough[a] && l[a] < 0.0) mask |= 1 << a;
  }
  return mask;
}

// (voxel, primitive, kink signs) for every pair whose uncut occupancy
// reaches the cutoff. A parameter step that changes this set crosses a
// point where central differences lose their accuracy.
inline std::set<std::tuple<std::size_t, std::size_t, int>> active_pairs(
    const std::vector<squasplat::Superquadric>& scene,
    const squasplat::GridSpec& spec, const squasplat::FieldConfig& cfg) {
  std::set<std::tuple<std::size_t, std::size_t, int>> s;
  for (std::size_t v = 0; v < spec.voxel_count(); ++v) {
    const Vec3 p = spec.voxel_center(spec.unravel(v));
    for (std::size_t i = 0; i < scene.size(); ++i) {
      if (occupancy(p, scene[i], cfg.lambda) >= cfg.cutoff) {
        s.insert({v, i, kink_signs(p, scene[i])});
      }
    }
  }
  return s;
}

struct GradCheck {
  int checked = 0;
  int excluded = 0;
  double max_rel_error = 0.0;
  double worst_analytic = 0.0;
  double worst_fd = 0.0;
};

// Central differences against splat_backward for every raw parameter of
// every primitive. Parameters whose +-10h perturbation changes the active
// pair set are excluded: those steps cross the cutoff or a kink. The
// relative error is |a - fd| / max(|a|, |fd|, floor).
inline GradCheck check_gradients(const std::vector<squasplat::Superquadric>& scene,
                                 int c, const squasplat::GridSpec& spec,
                                 const squasplat::FieldConfig& cfg,
                                 std::mt19937_64& rng, double h = 1e-5,
                                 double floor = 1e-6) {
  const std::size_t stride = static_cast<std::size_t>(c) + 1;
  std::vector<double> w(spec.voxel_count() * stride);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (double& x : w) x = u(rng);

  squasplat::GridGradient up;
  up.o_vec = w;
  squasplat::SplatOptions opt;
  opt.workers = 1;
  const auto grads = squasplat::splat_backward(scene, c, spec, cfg, up, opt);
  const auto base_active = active_pairs(scene, spec, cfg);

  GradCheck out;
  for (std::size_t i = 0; i < scene.size(); ++i) {
    for (int n = 0; n < 13 + c; ++n) {
      auto perturbed = [&](double delta) {
        auto s = scene;
        *parameter(s[i], n) += delta;
        return s;
      };
      if (active_pairs(perturbed(10 * h), spec, cfg) != base_active ||
          active_pairs(perturbed(-10 * h), spec, cfg) != base_active) {
        ++out.excluded;
        continue;
      }
      const long double fp = weighted_objective(perturbed(h), c, spec, cfg, w);
      const long double fm = weighted_objective(perturbed(-h), c, spec, cfg, w);
      const double fd = static_cast<double>((fp - fm) / (2.0L * h));
      const double a = analytic(grads[i], n);
      const double rel =
          std::abs(a - fd) / std::max({std::abs(a), std::abs(fd), floor});
      ++out.checked;
      if (rel > out.max_rel_error) {
        out.max_rel_error = rel;
        out.worst_analytic = a;
        out.worst_fd = fd;
      }
    }
  }
  return out;
}

// ---------------------------------------------------------- temporal --

struct PropagateCase {
  std::vector<squasplat::QueryState> previous;
  std::vector<squasplat::QueryState> pool;
  squasplat::FramePose pose;
  squasplat::PropagateParams params;
};

// Brute-force propagation: full sort for selection and an all-pairs
// distance check. Sampling uses the documented partial Fisher-Yates over
// the draws mix64(seed + (j + 1) * gamma).
inline std::vector<std::pair<std::uint64_t, squasplat::Provenance>>
propagate_reference(const PropagateCase& pc) {
  std::vector<std::pair<double, std::uint64_t>> ranked;
  std::vector<const squasplat::QueryState*> by_id;
  for (const auto& q : pc.previous) {
    double zeta = 0.0;
    for (const auto& m : q.cluster.members) zeta = std::max(zeta, m.scale.maxCoeff());
    ranked.push_back({zeta, q.id});
  }
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    return a.first != b.first ? a.first > b.first : a.second < b.second;
  });
  std::vector<std::pair<std::uint64_t, squasplat::Provenance>> out;
  std::vector<Vec3> kept;
  for (int i = 0; i < pc.params.n_p; ++i) {
    out.push_back({ranked[i].second, squasplat::Provenance::kPropagated});
    for (const auto& q : pc.previous) {
      if (q.id == ranked[i].second) {
        kept.push_back(pc.pose.rotation * q.ref_point + pc.pose.translation);
      }
    }
  }
  std::vector<std::uint64_t> survivors;
  for (const auto& q : pc.pool) {
    bool near = false;
    for (const Vec3& k : kept) near = near || (q.ref_point - k).norm() < pc.params.tau;
    if (!near) survivors.push_back(q.id);
  }
  const std::size_t need = static_cast<std::size_t>(pc.params.n_q - pc.params.n_p);
  const std::size_t take = std::min(need, survivors.size());
  for (std::size_t j = 0; j < take; ++j) {
    std::uint64_t r = pc.params.seed + (j + 1) * 0x9E3779B97F4A7C15ULL;
    r = (r ^ (r >> 30)) * 0xBF58476D1CE4E5B9ULL;
    r = (r ^ (r >> 27)) * 0x94D049BB133111EBULL;
    r ^= r >> 31;
    std::swap(survivors[j], survivors[j + r % (survivors.size() - j)]);
    out.push_back({survivors[j], squasplat::Provenance::kInitialized});
  }
  return out;
}

// ------------------------------------------------------------ metrics --

struct CountIou {
  double iou = 1.0;
  double miou = 1.0;
};

inline CountIou count_iou(const squasplat::LabelGrid& pred,
                          const squasplat::LabelGrid& gt) {
  const std::uint16_t empty = squasplat::kEmptyLabel;
  CountIou r;
  std::size_t inter = 0, uni = 0;
  for (std::size_t v = 0; v < gt.labels.size(); ++v) {
    inter += pred.labels[v] != empty && gt.labels[v] != empty;
    uni += pred.labels[v] != empty || gt.labels[v] != empty;
  }
  r.iou = uni ? static_cast<double>(inter) / uni : 1.0;
  double sum = 0.0;
  int present = 0;
  for (int c = 0; c < gt.num_classes; ++c) {
    std::size_t i = 0, u = 0;
    for (std::size_t v = 0; v < gt.labels.size(); ++v) {
      i += pred.labels[v] == c && gt.labels[v] == c;
      u += pred.labels[v] == c || gt.labels[v] == c;
    }
    if (u) {
      sum += static_cast<double>(i) / u;
      ++present;
    }
  }
  r.miou = present ? sum / present : 1.0;
  return r;
}

inline squasplat::LabelGrid random_labels(std::mt19937_64& rng,
                                          const squasplat::GridSpec& spec,
                                          int classes, double density) {
  squasplat::LabelGrid g(spec, classes);
  std::uniform_real_distribution<double> u(0, 1);
  for (auto& l : g.labels) {
    if (u(rng) < density) l = static_cast<std::uint16_t>(rng() % classes);
  }
  return g;
}

// First nonempty voxel along the ray by marching in steps of `step`; the
// returned depth is where the march first entered that voxel.
inline std::optional<squasplat::RayHit> march(const squasplat::LabelGrid& g,
                                              const squasplat::Ray& ray,
                                              double step, double max_t) {
  for (double t = 0.0; t <= max_t; t += step) {
    const auto idx = g.spec.world_to_voxel(ray.origin + t * ray.direction);
    if (!idx) continue;
    const auto label = g.at((*idx)[0], (*idx)[1], (*idx)[2]);
    if (label != squasplat::kEmptyLabel) return squasplat::RayHit{t, label};
  }
  return std::nullopt;
}

}  // namespace oracle
