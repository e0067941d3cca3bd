#include "squasplat/temporal.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <unordered_map>

#include <Eigen/LU>

#include "squasplat/random.hpp"

namespace squasplat {
namespace {

// Uniform hash grid over propagated reference points with cell size tau.
class PointIndex {
 public:
  PointIndex(const std::vector<Vec3>& points, double cell)
      : points_(points), cell_(cell) {
    for (std::size_t i = 0; i < points.size(); ++i) {
      buckets_[key(cell_of(points[i]))].push_back(i);
    }
  }

  bool any_closer_than(const Vec3& p, double tau) const {
    const auto c = cell_of(p);
    const double tau2 = tau * tau;
    for (int dz = -1; dz <= 1; ++dz)
      for (int dy = -1; dy <= 1; ++dy)
        for (int dx = -1; dx <= 1; ++dx) {
          auto it = buckets_.find(key({c[0] + dx, c[1] + dy, c[2] + dz}));
          if (it == buckets_.end()) continue;
          for (std::size_t i : it->second) {
            if ((points_[i] - p).squaredNorm() < tau2) return true;
          }
        }
    return false;
  }

 private:
  std::array<std::int64_t, 3> cell_of(const Vec3& p) const {
    return {static_cast<std::int64_t>(std::floor(p.x() / cell_)),
            static_cast<std::int64_t>(std::floor(p.y() / cell_)),
            static_cast<std::int64_t>(std::floor(p.z() / cell_))};
  }
  static std::uint64_t key(const std::array<std::int64_t, 3>& c) {
    std::uint64_t h = 0;
    for (auto v : c) h = mix64(h ^ static_cast<std::uint64_t>(v));
    return h;
  }

  const std::vector<Vec3>& points_;
  double cell_;
  std::unordered_map<std::uint64_t, std::vector<std::size_t>> buckets_;
};

}  // namespace

FramePose FramePose::from_quaternion(const Vec4& q, const Vec3& t,
                                     double timestamp) {
  FramePose pose;
  pose.timestamp = timestamp;
  pose.rotation = rotation_matrix(q);
  pose.translation = t;
  return pose;
}

FramePose FramePose::inverse() const {
  FramePose inv;
  inv.timestamp = timestamp;
  inv.rotation = rotation.transpose();
  inv.translation = -(inv.rotation * translation);
  return inv;
}

FramePose FramePose::then(const FramePose& next) const {
  FramePose out;
  out.timestamp = next.timestamp;
  out.rotation = next.rotation * rotation;
  out.translation = next.rotation * translation + next.translation;
  return out;
}

Vec4 FramePose::quaternion() const { return quat_from_matrix(rotation); }

void FramePose::validate() const {
  if (!rotation.allFinite() || !translation.allFinite()) {
    throw std::invalid_argument("frame pose: non-finite values");
  }
  const double ortho =
      (rotation.transpose() * rotation - Mat3::Identity()).cwiseAbs().maxCoeff();
  if (ortho > 1e-9 || std::abs(rotation.determinant() - 1.0) > 1e-9) {
    throw std::invalid_argument("frame pose: rotation is not orthonormal");
  }
}

QueryState make_query(std::uint64_t id, const SuperquadricCluster& cluster) {
  QueryState q;
  q.id = id;
  q.ref_point = cluster.ref_point;
  q.cluster = cluster;
  q.provenance = Provenance::kInitialized;
  return q;
}

double foreground_score(const SuperquadricCluster& cluster) {
  if (cluster.members.empty()) {
    throw std::invalid_argument("foreground_score: empty cluster");
  }
  double best = cluster.members.front().scale.maxCoeff();
  for (const auto& m : cluster.members) best = std::max(best, m.scale.maxCoeff());
  return best;
}

QueryState transform_query(const QueryState& q, const FramePose& pose) {
  QueryState out = q;
  out.ref_point = pose.apply(q.ref_point);
  out.cluster.ref_point = out.ref_point;
  const Vec4 turn = pose.quaternion();
  for (auto& m : out.cluster.members) {
    m.offset = pose.rotation * m.offset;
    m.rotation = quat_canonical(quat_multiply(turn, m.rotation));
  }
  return out;
}

std::vector<std::size_t> select_top(const std::vector<QueryState>& queries,
                                    int n) {
  std::vector<double> score(queries.size());
  for (std::size_t i = 0; i < queries.size(); ++i) {
    score[i] = foreground_score(queries[i].cluster);
  }
  std::vector<std::size_t> order(queries.size());
  std::iota(order.begin(), order.end(), 0);
  const auto take = std::min<std::size_t>(static_cast<std::size_t>(n),
                                          order.size());
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(take),
                    order.end(), [&](std::size_t a, std::size_t b) {
                      if (score[a] != score[b]) return score[a] > score[b];
                      return queries[a].id < queries[b].id;
                    });
  order.resize(take);
  return order;
}

std::vector<std::size_t> sample_indices(std::size_t m, std::size_t k,
                                        std::uint64_t seed) {
  k = std::min(k, m);
  std::vector<std::size_t> slots(m);
  std::iota(slots.begin(), slots.end(), 0);
  CounterRng rng(seed);
  for (std::size_t j = 0; j < k; ++j) {
    const std::size_t r = j + static_cast<std::size_t>(rng.below(m - j));
    std::swap(slots[j], slots[r]);
  }
  slots.resize(k);
  return slots;
}

PropagationResult propagate(const std::vector<QueryState>& previous,
                            const FramePose& pose,
                            const std::vector<QueryState>& init_pool,
                            const PropagateParams& params) {
  if (params.n_p < 0 || params.n_q < 0) {
    throw std::invalid_argument("propagate: negative budget");
  }
  if (static_cast<std::size_t>(params.n_p) > previous.size()) {
    throw std::invalid_argument("propagate: n_p exceeds previous query count");
  }
  if (params.n_p > params.n_q) {
    throw std::invalid_argument("propagate: n_p exceeds n_q");
  }
  if (!(params.tau > 0.0)) {
    throw std::invalid_argument("propagate: tau must be positive");
  }
  pose.validate();

  PropagationResult result;
  std::vector<Vec3> anchors;
  for (std::size_t i : select_top(previous, params.n_p)) {
    QueryState q = transform_query(previous[i], pose);
    q.provenance = Provenance::kPropagated;
    anchors.push_back(q.ref_point);
    result.queries.push_back(std::move(q));
  }
  result.propagated = static_cast<int>(result.queries.size());

  const PointIndex index(anchors, params.tau);
  std::vector<std::size_t> survivors;
  for (std::size_t i = 0; i < init_pool.size(); ++i) {
    if (!index.any_closer_than(init_pool[i].ref_point, params.tau)) {
      survivors.push_back(i);
    }
  }

  const auto need = static_cast<std::size_t>(params.n_q - params.n_p);
  result.shortfall = survivors.size() < need;
  for (std::size_t s : sample_indices(survivors.size(), need, params.seed)) {
    QueryState q = init_pool[survivors[s]];
    q.provenance = Provenance::kInitialized;
    result.queries.push_back(std::move(q));
  }
  result.initialized =
      static_cast<int>(result.queries.size()) - result.propagated;
  return result;
}

StreamResult run_stream(const std::vector<StreamFrame>& frames,
                        const PropagateParams& params) {
  if (frames.empty()) throw std::invalid_argument("run_stream: no frames");
  StreamResult out;
  std::uint64_t next_id = 0;
  std::vector<QueryState> previous;
  for (std::size_t f = 0; f < frames.size(); ++f) {
    std::vector<QueryState> pool;
    pool.reserve(frames[f].init_clusters.size());
    for (const auto& cluster : frames[f].init_clusters) {
      pool.push_back(make_query(next_id++, cluster));
    }

    PropagateParams step = params;
    step.seed = derive_seed(params.seed, f);
    step.n_p = f == 0 ? 0
                      : std::min(params.n_p, static_cast<int>(previous.size()));
    const FramePose pose = f == 0 ? FramePose::identity() : frames[f].pose;
    PropagationResult r = propagate(previous, pose, pool, step);

    FrameReport report;
    report.frame = static_cast<int>(f);
    report.propagated = r.propagated;
    report.initialized = r.initialized;
    report.shortfall = r.shortfall;
    double total = 0.0;
    for (const auto& q : r.queries) total += foreground_score(q.cluster);
    report.mean_score = r.queries.empty() ? 0.0 : total / r.queries.size();
    out.report.push_back(report);

    previous = r.queries;
    out.frames.push_back(std::move(r.queries));
  }
  return out;
}

}  // namespace squasplat
