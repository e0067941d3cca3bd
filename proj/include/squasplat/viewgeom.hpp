#pragma once

#include <optional>
#include <vector>

#include <Eigen/Core>

#include "squasplat/scene.hpp"
#include "squasplat/temporal.hpp"

namespace squasplat {

// Pinhole camera. Pixel (c, r) covers [c, c+1) x [r, r+1); its center sits
// at (c + 0.5, r + 0.5).
struct CameraModel {
  double fx = 1.0, fy = 1.0, cx = 0.0, cy = 0.0;
  FramePose ego_to_camera;  // camera looks along +z
  int width = 1, height = 1;
  double z_near = 1e-3;

  void validate() const;
};

struct Projection {
  bool hit = false;
  double u = 0.0, v = 0.0;
  double depth = 0.0;
};

Projection project(const Vec3& p_ego, const CameraModel& cam);

// Ego-frame point at camera depth `depth` behind pixel (u, v).
Vec3 unproject(double u, double v, double depth, const CameraModel& cam);

// C x H x W scalar stack, channel-major, row-major within a channel.
struct FeaturePlane {
  int channels = 1, height = 1, width = 1;
  std::vector<float> data;

  FeaturePlane() = default;
  FeaturePlane(int channels, int height, int width, float fill = 0.0f);

  float& at(int c, int r, int col) {
    return data[(static_cast<std::size_t>(c) * height + r) * width + col];
  }
  float at(int c, int r, int col) const {
    return data[(static_cast<std::size_t>(c) * height + r) * width + col];
  }
  void validate() const;
};

// Bilinear sample at continuous pixel coordinates with clamp-to-edge
// borders; returns one value per channel.
Eigen::VectorXd bilinear(const FeaturePlane& plane, double u, double v);

struct SampleSpec {
  Vec3 ref_point = Vec3::Zero();
  std::vector<Vec3> offsets;
  // weights[i][l]: non-negative, each row sums to 1.
  std::vector<std::vector<double>> weights;

  void validate() const;
};

std::vector<Vec3> make_sample_points(const SampleSpec& spec);

// Feature planes indexed [frame][view][level].
using FeatureBank = std::vector<std::vector<std::vector<FeaturePlane>>>;

struct SampleResult {
  Eigen::MatrixXd features;   // (T * N_s) x C, row t * N_s + i
  std::vector<bool> missed;   // no view hit; the row is zero
};

// Multi-frame, multi-view, multi-scale sampling. Each point is moved into
// frame t by poses[t], projected into every camera, and the per-view sums
// sum_l w[i][l] * bilinear(level l) are averaged over the views that hit.
// Level l samples at image coordinates scaled by (W_l / W, H_l / H).
SampleResult sample_multiframe(const SampleSpec& spec, const FeatureBank& bank,
                               const std::vector<CameraModel>& cameras,
                               const std::vector<FramePose>& poses);

}  // namespace squasplat
