#pragma once

#include <cstdint>
#include <vector>

#include "squasplat/scene.hpp"

namespace squasplat {

// Rigid transform taking coordinates of one frame into a target frame.
struct FramePose {
  double timestamp = 0.0;
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();

  static FramePose identity() { return {}; }
  static FramePose from_quaternion(const Vec4& q, const Vec3& t,
                                   double timestamp = 0.0);

  Vec3 apply(const Vec3& p) const { return rotation * p + translation; }
  FramePose inverse() const;
  // Transform equivalent to applying *this first and then `next`.
  FramePose then(const FramePose& next) const;
  Vec4 quaternion() const;

  // Throws std::invalid_argument unless the rotation is orthonormal with
  // determinant +1 within 1e-9.
  void validate() const;
};

enum class Provenance { kPropagated, kInitialized };

struct QueryState {
  std::uint64_t id = 0;
  Vec3 ref_point = Vec3::Zero();
  SuperquadricCluster cluster;  // cluster.ref_point == ref_point
  Provenance provenance = Provenance::kInitialized;
};

QueryState make_query(std::uint64_t id, const SuperquadricCluster& cluster);

// Largest scale component over all cluster members. Throws
// std::invalid_argument for an empty cluster.
double foreground_score(const SuperquadricCluster& cluster);

// Moves reference point and member centers by the pose and composes member
// rotations with it; shape, opacity and semantics are unchanged.
QueryState transform_query(const QueryState& q, const FramePose& pose);

// Indices of the n highest-scoring queries, ties broken by ascending id,
// in rank order.
std::vector<std::size_t> select_top(const std::vector<QueryState>& queries,
                                    int n);

// Partial Fisher-Yates draw of k distinct indices from [0, m): for
// j = 0..k-1 with draws r_j from CounterRng(seed), swap slot j with slot
// j + (r_j mod (m - j)); the first k slots are returned in draw order.
std::vector<std::size_t> sample_indices(std::size_t m, std::size_t k,
                                        std::uint64_t seed);

struct PropagateParams {
  int n_p = 500;
  int n_q = 600;
  double tau = 1.0;  // meters
  std::uint64_t seed = 0;
};

struct PropagationResult {
  std::vector<QueryState> queries;  // propagated (rank order), then sampled
  int propagated = 0;
  int initialized = 0;
  bool shortfall = false;  // fewer survivors than n_q - n_p
};

// Top-n_p selection, alignment by `pose`, removal of initialization queries
// closer than tau to any propagated reference point, and a seeded sample of
// n_q - n_p survivors. Throws std::invalid_argument when n_p exceeds the
// previous query count or n_q.
PropagationResult propagate(const std::vector<QueryState>& previous,
                            const FramePose& pose,
                            const std::vector<QueryState>& init_pool,
                            const PropagateParams& params);

struct StreamFrame {
  // Maps the previous frame's coordinates into this frame's; ignored for
  // the first frame.
  FramePose pose;
  std::vector<SuperquadricCluster> init_clusters;
};

struct FrameReport {
  int frame = 0;
  int propagated = 0;
  int initialized = 0;
  double mean_score = 0.0;
  bool shortfall = false;
};

struct StreamResult {
  std::vector<std::vector<QueryState>> frames;
  std::vector<FrameReport> report;
};

// Drives propagate() across a sequence. Frame f uses seed
// derive_seed(params.seed, f); initialization queries receive ids in
// order of appearance across the whole stream.
StreamResult run_stream(const std::vector<StreamFrame>& frames,
                        const PropagateParams& params);

}  // namespace squasplat
