#pragma once

#include <cstdint>
#include <vector>

#include "squasplat/backward.hpp"
#include "squasplat/grid.hpp"
#include "squasplat/scene.hpp"

namespace squasplat {

// Probabilities are clamped to [kProbFloor, 1 - kProbFloor] inside the loss.
inline constexpr double kProbFloor = 1e-6;
// Positive floor added to the softplus scale map.
inline constexpr double kMinScale = 1e-3;

struct LossWeights {
  double occupancy = 1.0;
  double semantic = 1.0;
};

struct LossTerms {
  double occupancy = 0.0;  // mean binary cross-entropy over all voxels
  double semantic = 0.0;   // mean cross-entropy over target-occupied voxels
  double total = 0.0;
};

// Binary cross-entropy on p_occ plus masked semantic cross-entropy. `pred`
// must carry full semantics. Writes d(total)/d(pred) into `grad` when given.
// Throws std::invalid_argument on a grid spec or class count mismatch.
LossTerms grid_loss(const VoxelGrid& pred, const VoxelGrid& target,
                    const LossWeights& weights, GridGradient* grad = nullptr);

// Unconstrained parameters of one cluster member.
struct MemberParams {
  Vec3 offset = Vec3::Zero();
  Vec4 rotation = Vec4(1.0, 0.0, 0.0, 0.0);  // normalized on the way out
  Vec3 scale = Vec3::Zero();                 // s = kMinScale + softplus
  Vec2 eps = Vec2::Zero();                   // squashed into the eps range
  double opacity = 0.0;                      // sigma = logistic(a)
};

struct ClusterParams {
  Vec3 ref_point = Vec3::Zero();
  std::vector<MemberParams> members;
  std::vector<double> logits;  // c = softmax(logits)
};

double softplus(double x);
double inverse_softplus(double y);
double logistic(double x);
double logit(double p);
std::vector<double> softmax(const std::vector<double>& logits);

double scale_from_param(double u);
double scale_to_param(double s);
double eps_from_param(double v, const EpsRange& range);
double eps_to_param(double eps, const EpsRange& range);

// Forward map onto a valid cluster. With `raw_rotation` the quaternion is
// passed through unnormalized (the field normalizes it internally).
SuperquadricCluster to_cluster(const ClusterParams& params,
                               const EpsRange& range,
                               bool raw_rotation = false);

enum class InitMode { kOccupiedSample, kUniform };

// Reference points drawn from occupied voxel centers (uniform in the bounds
// when the target is empty or mode is kUniform); members start as spheres of
// twice the voxel size with opacity 0.5 and uniform semantics.
std::vector<ClusterParams> init_clusters(const VoxelGrid& target,
                                         int n_clusters, int members,
                                         std::uint64_t seed,
                                         const EpsRange& range = {},
                                         InitMode mode = InitMode::kOccupiedSample);

// Replaces every member by children so each cluster ends with `new_size`
// members: offsets jittered by +-0.25 * mean scale, scales shrunk by
// (children)^(-1/3).
void split_members(std::vector<ClusterParams>& clusters, int new_size,
                   std::uint64_t seed);

struct FitConfig {
  std::vector<int> schedule = {2, 2, 4, 4, 8, 8};
  int iters_per_stage = 100;
  double learning_rate = 2.0;  // on the voxel-mean loss
  double momentum = 0.9;
  double max_step = 0.02;  // per-coordinate clip of each update
  LossWeights weights;
  std::uint64_t seed = 0;
  FieldConfig field;
  EpsRange eps_range;
  int tile_size = 4;
  int workers = 0;

  void validate() const;
};

struct TraceRow {
  int stage = 0;
  int iter = 0;
  int members = 0;
  double loss = 0.0;
  double iou = 0.0;
};

struct FitResult {
  std::vector<SuperquadricCluster> clusters;
  std::vector<TraceRow> trace;
  double final_loss = 0.0;
  double final_iou = 0.0;
};

// Coarse-to-fine momentum descent over the cluster parameters. Throws
// std::invalid_argument for n_clusters < 1 and std::runtime_error when the
// loss turns non-finite.
FitResult fit_scene(const VoxelGrid& target, int n_clusters,
                    const FitConfig& cfg);

// Occupied-vs-empty IoU of two label grids over the same spec.
double occupancy_iou(const LabelGrid& a, const LabelGrid& b);

}  // namespace squasplat
