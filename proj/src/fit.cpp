#include "squasplat/fit.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

#include "squasplat/random.hpp"
#include "squasplat/splat.hpp"

namespace squasplat {
namespace {

constexpr int kMemberStride = 13;  // offset 3, rotation 4, scale 3, eps 2, a 1

double clamp_prob(double p) {
  return std::clamp(p, kProbFloor, 1.0 - kProbFloor);
}

std::size_t packed_size(const std::vector<ClusterParams>& clusters) {
  std::size_t n = 0;
  for (const auto& c : clusters) {
    n += 3 + c.logits.size() + c.members.size() * kMemberStride;
  }
  return n;
}

std::vector<double> pack(const std::vector<ClusterParams>& clusters) {
  std::vector<double> out;
  out.reserve(packed_size(clusters));
  for (const auto& c : clusters) {
    out.insert(out.end(), c.ref_point.data(), c.ref_point.data() + 3);
    out.insert(out.end(), c.logits.begin(), c.logits.end());
    for (const auto& m : c.members) {
      out.insert(out.end(), m.offset.data(), m.offset.data() + 3);
      out.insert(out.end(), m.rotation.data(), m.rotation.data() + 4);
      out.insert(out.end(), m.scale.data(), m.scale.data() + 3);
      out.insert(out.end(), m.eps.data(), m.eps.data() + 2);
      out.push_back(m.opacity);
    }
  }
  return out;
}

void unpack(const std::vector<double>& flat,
            std::vector<ClusterParams>& clusters) {
  std::size_t i = 0;
  auto take = [&](double* dst, int n) {
    for (int k = 0; k < n; ++k) dst[k] = flat[i++];
  };
  for (auto& c : clusters) {
    take(c.ref_point.data(), 3);
    take(c.logits.data(), static_cast<int>(c.logits.size()));
    for (auto& m : c.members) {
      take(m.offset.data(), 3);
      take(m.rotation.data(), 4);
      take(m.scale.data(), 3);
      take(m.eps.data(), 2);
      take(&m.opacity, 1);
    }
  }
}

// Chains primitive gradients (expanded cluster order) onto the packed
// parameter layout.
std::vector<double> chain_gradients(
    const std::vector<ClusterParams>& clusters,
    const std::vector<SuperquadricGradient>& prim_grads,
    const EpsRange& range) {
  std::vector<double> out;
  out.reserve(packed_size(clusters));
  std::size_t p = 0;
  for (const auto& c : clusters) {
    Vec3 d_ref = Vec3::Zero();
    std::vector<double> d_sem(c.logits.size(), 0.0);
    std::vector<double> members;
    members.reserve(c.members.size() * kMemberStride);
    for (const auto& m : c.members) {
      const SuperquadricGradient& g = prim_grads[p++];
      d_ref += g.center;
      for (std::size_t k = 0; k < d_sem.size(); ++k) d_sem[k] += g.semantics[k];
      members.insert(members.end(), g.center.data(), g.center.data() + 3);
      members.insert(members.end(), g.rotation.data(), g.rotation.data() + 4);
      for (int a = 0; a < 3; ++a) {
        members.push_back(g.scale[a] * logistic(m.scale[a]));
      }
      for (int a = 0; a < 2; ++a) {
        const double sg = logistic(m.eps[a]);
        members.push_back(g.eps[a] * (range.max - range.min) * sg * (1.0 - sg));
      }
      const double so = logistic(m.opacity);
      members.push_back(g.opacity * so * (1.0 - so));
    }
    const std::vector<double> prob = softmax(c.logits);
    double dot = 0.0;
    for (std::size_t k = 0; k < prob.size(); ++k) dot += prob[k] * d_sem[k];
    out.insert(out.end(), d_ref.data(), d_ref.data() + 3);
    for (std::size_t k = 0; k < prob.size(); ++k) {
      out.push_back(prob[k] * (d_sem[k] - dot));
    }
    out.insert(out.end(), members.begin(), members.end());
  }
  return out;
}

std::vector<SuperquadricCluster> forward_clusters(
    const std::vector<ClusterParams>& params, const EpsRange& range,
    bool raw_rotation) {
  std::vector<SuperquadricCluster> out;
  out.reserve(params.size());
  for (const auto& p : params) out.push_back(to_cluster(p, range, raw_rotation));
  return out;
}

}  // namespace

LossTerms grid_loss(const VoxelGrid& pred, const VoxelGrid& target,
                    const LossWeights& weights, GridGradient* grad) {
  if (!(pred.spec == target.spec)) {
    throw std::invalid_argument("grid_loss: grid spec mismatch");
  }
  if (pred.num_classes != target.num_classes) {
    throw std::invalid_argument("grid_loss: class count mismatch");
  }
  if (!pred.has_semantics()) {
    throw std::invalid_argument("grid_loss: prediction lacks semantics");
  }
  const std::size_t n = pred.spec.voxel_count();
  const auto c = static_cast<std::size_t>(pred.num_classes);

  std::size_t masked = 0;
  for (std::size_t v = 0; v < n; ++v) {
    masked += target.occupancy[v] >= kOccupiedThreshold;
  }

  if (grad) {
    grad->o_vec.clear();
    grad->occupancy.assign(n, 0.0);
    grad->semantics.assign(n * c, 0.0);
  }

  // Target class distribution of voxel v: full semantics when present,
  // otherwise one-hot on the label.
  auto target_prob = [&](std::size_t v, std::size_t k) {
    if (target.has_semantics()) return target.semantics[v * c + k];
    return target.labels[v] == k ? 1.0 : 0.0;
  };

  LossTerms terms;
  const double occ_scale = 1.0 / static_cast<double>(n);
  const double sem_scale = masked ? 1.0 / static_cast<double>(masked) : 0.0;
  for (std::size_t v = 0; v < n; ++v) {
    const double y = target.occupancy[v];
    const double p_raw = pred.occupancy[v];
    const double p = clamp_prob(p_raw);
    terms.occupancy -= y * std::log(p) + (1.0 - y) * std::log(1.0 - p);
    if (grad && p == p_raw) {
      grad->occupancy[v] =
          weights.occupancy * occ_scale * (p - y) / (p * (1.0 - p));
    }
    if (y < kOccupiedThreshold) continue;
    const double* ps = pred.semantics_at(v);
    for (std::size_t k = 0; k < c; ++k) {
      const double t = target_prob(v, k);
      if (t == 0.0) continue;
      const double q = std::max(ps[k], kProbFloor);
      terms.semantic -= t * std::log(q);
      if (grad && ps[k] > kProbFloor) {
        grad->semantics[v * c + k] = -weights.semantic * sem_scale * t / ps[k];
      }
    }
  }
  terms.occupancy *= occ_scale;
  terms.semantic *= sem_scale;
  terms.total = weights.occupancy * terms.occupancy +
                weights.semantic * terms.semantic;
  return terms;
}

double softplus(double x) {
  return x > 30.0 ? x : std::log1p(std::exp(x));
}

double inverse_softplus(double y) {
  return y > 30.0 ? y : std::log(std::expm1(y));
}

double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }

double logit(double p) { return std::log(p / (1.0 - p)); }

std::vector<double> softmax(const std::vector<double>& logits) {
  double top = logits.empty() ? 0.0 : logits[0];
  for (double z : logits) top = std::max(top, z);
  std::vector<double> out(logits.size());
  double sum = 0.0;
  for (std::size_t k = 0; k < logits.size(); ++k) {
    out[k] = std::exp(logits[k] - top);
    sum += out[k];
  }
  for (double& v : out) v /= sum;
  return out;
}

double scale_from_param(double u) { return kMinScale + softplus(u); }
double scale_to_param(double s) {
  return inverse_softplus(std::max(s - kMinScale, 1e-9));
}

double eps_from_param(double v, const EpsRange& range) {
  return range.min + (range.max - range.min) * logistic(v);
}
double eps_to_param(double eps, const EpsRange& range) {
  const double t = (eps - range.min) / (range.max - range.min);
  return logit(std::clamp(t, 1e-9, 1.0 - 1e-9));
}

SuperquadricCluster to_cluster(const ClusterParams& params,
                               const EpsRange& range, bool raw_rotation) {
  SuperquadricCluster out;
  out.ref_point = params.ref_point;
  out.semantics = softmax(params.logits);
  out.members.reserve(params.members.size());
  for (const auto& m : params.members) {
    ClusterMember member;
    member.offset = m.offset;
    member.rotation = raw_rotation ? m.rotation : quat_canonical(m.rotation);
    for (int a = 0; a < 3; ++a) member.scale[a] = scale_from_param(m.scale[a]);
    for (int a = 0; a < 2; ++a) member.eps[a] = eps_from_param(m.eps[a], range);
    member.opacity = logistic(m.opacity);
    out.members.push_back(member);
  }
  return out;
}

std::vector<ClusterParams> init_clusters(const VoxelGrid& target,
                                         int n_clusters, int members,
                                         std::uint64_t seed,
                                         const EpsRange& range,
                                         InitMode mode) {
  if (n_clusters < 1) {
    throw std::invalid_argument("init_clusters: need at least one cluster");
  }
  if (members < 1) {
    throw std::invalid_argument("init_clusters: need at least one member");
  }
  const GridSpec& spec = target.spec;
  std::vector<std::size_t> occupied;
  if (mode == InitMode::kOccupiedSample) {
    for (std::size_t v = 0; v < target.occupancy.size(); ++v) {
      if (target.occupancy[v] >= kOccupiedThreshold) occupied.push_back(v);
    }
  }
  const Vec3 voxel = spec.voxel_size();
  const double jitter = 0.5 * voxel.mean();

  CounterRng rng(derive_seed(seed, 0x1417));
  std::vector<ClusterParams> out(static_cast<std::size_t>(n_clusters));
  for (auto& cluster : out) {
    if (occupied.empty()) {
      for (int a = 0; a < 3; ++a) {
        cluster.ref_point[a] = rng.uniform(spec.lower[a], spec.upper[a]);
      }
    } else {
      cluster.ref_point =
          spec.voxel_center(spec.unravel(occupied[rng.below(occupied.size())]));
    }
    cluster.logits.assign(static_cast<std::size_t>(target.num_classes), 0.0);
    for (int k = 0; k < members; ++k) {
      MemberParams m;
      m.offset = members > 1 ? Vec3(jitter * rng.unit_vector()) : Vec3::Zero();
      for (int a = 0; a < 3; ++a) m.scale[a] = scale_to_param(2.0 * voxel[a]);
      m.eps = Vec2::Constant(eps_to_param(1.0, range));
      m.opacity = 0.0;
      cluster.members.push_back(m);
    }
  }
  return out;
}

void split_members(std::vector<ClusterParams>& clusters, int new_size,
                   std::uint64_t seed) {
  CounterRng rng(seed);
  for (auto& cluster : clusters) {
    const int old_size = static_cast<int>(cluster.members.size());
    if (new_size < old_size) {
      throw std::invalid_argument("split_members: schedule must not decrease");
    }
    if (new_size == old_size) continue;
    std::vector<MemberParams> next;
    next.reserve(static_cast<std::size_t>(new_size));
    for (int k = 0; k < old_size; ++k) {
      const MemberParams& parent = cluster.members[k];
      const int children = new_size / old_size + (k < new_size % old_size);
      double mean_scale = 0.0;
      for (int a = 0; a < 3; ++a) mean_scale += scale_from_param(parent.scale[a]);
      mean_scale /= 3.0;
      const double shrink = std::pow(static_cast<double>(children), -1.0 / 3.0);
      Vec3 dir = Vec3::Zero();
      for (int c = 0; c < children; ++c) {
        MemberParams child = parent;
        // Children come in mirrored pairs around the parent center.
        if (c % 2 == 0) dir = rng.unit_vector();
        const double sign = c % 2 == 0 ? 1.0 : -1.0;
        if (children > 1) child.offset += sign * 0.25 * mean_scale * dir;
        for (int a = 0; a < 3; ++a) {
          child.scale[a] =
              scale_to_param(scale_from_param(parent.scale[a]) * shrink);
        }
        next.push_back(child);
      }
    }
    cluster.members = std::move(next);
  }
}

void FitConfig::validate() const {
  if (schedule.empty()) throw std::invalid_argument("fit: empty schedule");
  for (std::size_t s = 0; s < schedule.size(); ++s) {
    if (schedule[s] < 1) {
      throw std::invalid_argument("fit: schedule entries must be >= 1");
    }
    if (s > 0 && schedule[s] < schedule[s - 1]) {
      throw std::invalid_argument("fit: schedule must be non-decreasing");
    }
  }
  if (iters_per_stage < 1) throw std::invalid_argument("fit: iters < 1");
  if (!(learning_rate > 0.0)) throw std::invalid_argument("fit: lr <= 0");
  if (!(momentum >= 0.0 && momentum < 1.0)) {
    throw std::invalid_argument("fit: momentum must lie in [0, 1)");
  }
  if (!(max_step > 0.0)) throw std::invalid_argument("fit: max_step <= 0");
  field.validate();
}

double occupancy_iou(const LabelGrid& a, const LabelGrid& b) {
  if (!(a.spec == b.spec)) {
    throw std::invalid_argument("occupancy_iou: grid spec mismatch");
  }
  std::size_t inter = 0, uni = 0;
  for (std::size_t v = 0; v < a.labels.size(); ++v) {
    const bool pa = a.labels[v] != kEmptyLabel;
    const bool pb = b.labels[v] != kEmptyLabel;
    inter += pa && pb;
    uni += pa || pb;
  }
  return uni == 0 ? 1.0 : static_cast<double>(inter) / uni;
}

FitResult fit_scene(const VoxelGrid& target, int n_clusters,
                    const FitConfig& cfg) {
  cfg.validate();
  if (n_clusters < 1) {
    throw std::invalid_argument("fit_scene: n_clusters must be >= 1");
  }
  target.spec.validate();
  const int c = target.num_classes;
  const LabelGrid target_labels = target.label_grid();
  SplatOptions splat_options;
  splat_options.tile_size = cfg.tile_size;
  splat_options.workers = cfg.workers;
  splat_options.keep_semantics = true;

  std::vector<ClusterParams> params =
      init_clusters(target, n_clusters, cfg.schedule.front(), cfg.seed,
                    cfg.eps_range);

  auto evaluate = [&](const std::vector<ClusterParams>& p, GridGradient* grad,
                      std::vector<Superquadric>* scene_out, double* iou) {
    std::vector<Superquadric> scene =
        expand_clusters(forward_clusters(p, cfg.eps_range, true));
    const VoxelGrid pred =
        splat_tiled(scene, c, target.spec, cfg.field, splat_options);
    const LossTerms terms = grid_loss(pred, target, cfg.weights, grad);
    if (iou) *iou = occupancy_iou(pred.label_grid(), target_labels);
    if (scene_out) *scene_out = std::move(scene);
    return terms.total;
  };

  FitResult result;
  for (std::size_t stage = 0; stage < cfg.schedule.size(); ++stage) {
    const int k = cfg.schedule[stage];
    if (stage > 0 && k > cfg.schedule[stage - 1]) {
      split_members(params, k, derive_seed(cfg.seed, 0x5000 + stage));
    }
    std::vector<double> flat = pack(params);
    std::vector<double> velocity(flat.size(), 0.0);
    for (int it = 0; it < cfg.iters_per_stage; ++it) {
      GridGradient upstream;
      std::vector<Superquadric> scene;
      double iou = 0.0;
      const double loss = evaluate(params, &upstream, &scene, &iou);
      if (!std::isfinite(loss)) {
        std::ostringstream msg;
        msg << "fit_scene: non-finite loss at stage " << stage << " (K=" << k
            << "), iteration " << it;
        throw std::runtime_error(msg.str());
      }
      result.trace.push_back({static_cast<int>(stage), it, k, loss, iou});

      const auto prim_grads = splat_backward(scene, c, target.spec, cfg.field,
                                             upstream, splat_options);
      const std::vector<double> g =
          chain_gradients(params, prim_grads, cfg.eps_range);
      for (std::size_t q = 0; q < flat.size(); ++q) {
        velocity[q] = cfg.momentum * velocity[q] + g[q];
        flat[q] -= std::clamp(cfg.learning_rate * velocity[q], -cfg.max_step,
                              cfg.max_step);
      }
      unpack(flat, params);
      // Keep raw quaternions at unit length so the rotation step size does
      // not drift with their norm.
      for (auto& cluster : params) {
        for (auto& m : cluster.members) m.rotation.normalize();
      }
      flat = pack(params);
    }
  }

  double iou = 0.0;
  result.final_loss = evaluate(params, nullptr, nullptr, &iou);
  result.final_iou = iou;
  result.clusters = forward_clusters(params, cfg.eps_range, false);
  return result;
}

}  // namespace squasplat
