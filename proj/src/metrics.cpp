#include "squasplat/metrics.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace squasplat {

std::optional<double> Counts::iou() const {
  const std::uint64_t denom = tp + fp + fn;
  if (denom == 0) return std::nullopt;
  return static_cast<double>(tp) / static_cast<double>(denom);
}

double Confusion::iou() const { return occupied.iou().value_or(1.0); }

double Confusion::miou() const {
  double sum = 0.0;
  int present = 0;
  for (const Counts& c : per_class) {
    if (auto v = c.iou()) {
      sum += *v;
      ++present;
    }
  }
  return present == 0 ? 1.0 : sum / present;
}

Confusion confusion(const LabelGrid& pred, const LabelGrid& gt) {
  if (!(pred.spec == gt.spec) || pred.labels.size() != gt.labels.size()) {
    throw std::invalid_argument("confusion: grid spec mismatch");
  }
  if (pred.num_classes != gt.num_classes) {
    throw std::invalid_argument("confusion: class count mismatch");
  }
  Confusion out;
  out.per_class.resize(static_cast<std::size_t>(gt.num_classes));
  auto in_range = [&](std::uint16_t l) {
    return l != kEmptyLabel && l < gt.num_classes;
  };
  for (std::size_t v = 0; v < gt.labels.size(); ++v) {
    const std::uint16_t p = pred.labels[v];
    const std::uint16_t g = gt.labels[v];
    const bool po = p != kEmptyLabel;
    const bool go = g != kEmptyLabel;
    if (po && go) ++out.occupied.tp;
    else if (po) ++out.occupied.fp;
    else if (go) ++out.occupied.fn;

    if (p == g) {
      if (in_range(g)) ++out.per_class[g].tp;
      continue;
    }
    if (in_range(p)) ++out.per_class[p].fp;
    if (in_range(g)) ++out.per_class[g].fn;
  }
  return out;
}

RaySet make_rayset(const RaySetParams& params) {
  if (params.azimuths < 1) throw std::invalid_argument("rayset: azimuths < 1");
  RaySet set;
  set.params = params;
  for (double elev_deg : params.elevations_deg) {
    const double elev = elev_deg * std::numbers::pi / 180.0;
    for (int a = 0; a < params.azimuths; ++a) {
      const double az = 2.0 * std::numbers::pi * a / params.azimuths;
      Ray ray;
      ray.origin = params.origin;
      ray.direction = Vec3(std::cos(elev) * std::cos(az),
                           std::cos(elev) * std::sin(az), std::sin(elev));
      set.rays.push_back(ray);
    }
  }
  return set;
}

std::optional<RayHit> cast_ray(const LabelGrid& grid, const Ray& ray) {
  const GridSpec& spec = grid.spec;
  const Vec3 size = spec.voxel_size();
  const Vec3& o = ray.origin;
  const Vec3& d = ray.direction;
  constexpr double kInf = std::numeric_limits<double>::infinity();

  // Clip the ray against the grid box.
  double t_enter = 0.0, t_exit = kInf;
  for (int a = 0; a < 3; ++a) {
    if (d[a] == 0.0) {
      if (o[a] < spec.lower[a] || o[a] > spec.upper[a]) return std::nullopt;
      continue;
    }
    double t0 = (spec.lower[a] - o[a]) / d[a];
    double t1 = (spec.upper[a] - o[a]) / d[a];
    if (t0 > t1) std::swap(t0, t1);
    t_enter = std::max(t_enter, t0);
    t_exit = std::min(t_exit, t1);
  }
  if (t_enter > t_exit) return std::nullopt;

  Index3 idx{};
  Index3 step{};
  const Vec3 entry = o + t_enter * d;
  for (int a = 0; a < 3; ++a) {
    const double u = std::floor((entry[a] - spec.lower[a]) / size[a]);
    idx[a] = static_cast<int>(
        std::clamp(u, 0.0, static_cast<double>(spec.resolution[a] - 1)));
    step[a] = d[a] > 0.0 ? 1 : (d[a] < 0.0 ? -1 : 0);
  }
  auto next_crossing = [&](int a) {
    if (step[a] == 0) return kInf;
    const double boundary =
        spec.lower[a] + (idx[a] + (step[a] > 0 ? 1 : 0)) * size[a];
    return (boundary - o[a]) / d[a];
  };

  double t = t_enter;
  for (;;) {
    const std::uint16_t label = grid.at(idx[0], idx[1], idx[2]);
    if (label != kEmptyLabel) return RayHit{t, label};
    int axis = 0;
    double best = next_crossing(0);
    for (int a = 1; a < 3; ++a) {
      const double c = next_crossing(a);
      if (c < best) {
        best = c;
        axis = a;
      }
    }
    if (best == kInf || best > t_exit) return std::nullopt;
    t = std::max(t, best);
    idx[axis] += step[axis];
    if (idx[axis] < 0 || idx[axis] >= spec.resolution[axis]) {
      return std::nullopt;
    }
  }
}

RayIouResult ray_iou(const LabelGrid& pred, const LabelGrid& gt,
                     const std::vector<Ray>& rays,
                     const RayIouOptions& options) {
  if (rays.empty()) throw std::invalid_argument("ray_iou: empty ray set");
  if (!(pred.spec == gt.spec)) {
    throw std::invalid_argument("ray_iou: grid spec mismatch");
  }
  if (options.thresholds.empty()) {
    throw std::invalid_argument("ray_iou: no thresholds");
  }
  std::vector<std::optional<RayHit>> pred_hits, gt_hits;
  pred_hits.reserve(rays.size());
  gt_hits.reserve(rays.size());
  for (const Ray& ray : rays) {
    pred_hits.push_back(cast_ray(pred, ray));
    gt_hits.push_back(cast_ray(gt, ray));
  }

  RayIouResult out;
  out.thresholds = options.thresholds;
  for (double threshold : options.thresholds) {
    Counts c;
    for (std::size_t r = 0; r < rays.size(); ++r) {
      const auto& p = pred_hits[r];
      const auto& g = gt_hits[r];
      const bool match =
          p && g && (options.class_agnostic || p->label == g->label) &&
          std::abs(p->depth - g->depth) <= threshold;
      if (match) {
        ++c.tp;
        continue;
      }
      if (p) ++c.fp;
      if (g) ++c.fn;
    }
    out.counts.push_back(c);
    out.scores.push_back(c.iou().value_or(1.0));
  }
  double sum = 0.0;
  for (double s : out.scores) sum += s;
  out.mean = sum / static_cast<double>(out.scores.size());
  return out;
}

}  // namespace squasplat
