#include "squasplat/viewgeom.hpp"

#include <cmath>
#include <stdexcept>

namespace squasplat {

void CameraModel::validate() const {
  if (!(fx > 0.0 && fy > 0.0)) {
    throw std::invalid_argument("camera: focal lengths must be positive");
  }
  if (width <= 0 || height <= 0) {
    throw std::invalid_argument("camera: image size must be positive");
  }
  ego_to_camera.validate();
}

Projection project(const Vec3& p_ego, const CameraModel& cam) {
  const Vec3 pc = cam.ego_to_camera.apply(p_ego);
  Projection out;
  out.depth = pc.z();
  if (!(pc.z() > cam.z_near)) return out;
  out.u = cam.fx * pc.x() / pc.z() + cam.cx;
  out.v = cam.fy * pc.y() / pc.z() + cam.cy;
  out.hit = out.u >= 0.0 && out.u < cam.width && out.v >= 0.0 &&
            out.v < cam.height;
  return out;
}

Vec3 unproject(double u, double v, double depth, const CameraModel& cam) {
  const Vec3 pc((u - cam.cx) / cam.fx * depth, (v - cam.cy) / cam.fy * depth,
                depth);
  return cam.ego_to_camera.inverse().apply(pc);
}

FeaturePlane::FeaturePlane(int c, int h, int w, float fill)
    : channels(c), height(h), width(w) {
  validate();
  data.assign(static_cast<std::size_t>(c) * h * w, fill);
}

void FeaturePlane::validate() const {
  if (channels <= 0 || height <= 0 || width <= 0) {
    throw std::invalid_argument("feature plane: dimensions must be positive");
  }
}

Eigen::VectorXd bilinear(const FeaturePlane& plane, double u, double v) {
  const double x = u - 0.5;
  const double y = v - 0.5;
  const double x0f = std::floor(x);
  const double y0f = std::floor(y);
  const double ax = x - x0f;
  const double ay = y - y0f;
  auto clamp_col = [&](double c) {
    return static_cast<int>(std::clamp(c, 0.0, plane.width - 1.0));
  };
  auto clamp_row = [&](double r) {
    return static_cast<int>(std::clamp(r, 0.0, plane.height - 1.0));
  };
  const int c0 = clamp_col(x0f), c1 = clamp_col(x0f + 1.0);
  const int r0 = clamp_row(y0f), r1 = clamp_row(y0f + 1.0);

  Eigen::VectorXd out(plane.channels);
  for (int ch = 0; ch < plane.channels; ++ch) {
    const double top = (1.0 - ax) * plane.at(ch, r0, c0) + ax * plane.at(ch, r0, c1);
    const double bottom = (1.0 - ax) * plane.at(ch, r1, c0) + ax * plane.at(ch, r1, c1);
    out[ch] = (1.0 - ay) * top + ay * bottom;
  }
  return out;
}

void SampleSpec::validate() const {
  if (weights.size() != offsets.size()) {
    throw std::invalid_argument("sample spec: one weight row per offset");
  }
  for (const auto& row : weights) {
    if (row.empty()) throw std::invalid_argument("sample spec: empty weights");
    double sum = 0.0;
    for (double w : row) {
      if (!(w >= 0.0)) throw std::invalid_argument("sample spec: weight < 0");
      sum += w;
    }
    if (std::abs(sum - 1.0) > 1e-9) {
      throw std::invalid_argument("sample spec: weights must sum to 1");
    }
  }
}

std::vector<Vec3> make_sample_points(const SampleSpec& spec) {
  std::vector<Vec3> out;
  out.reserve(spec.offsets.size());
  for (const Vec3& d : spec.offsets) out.push_back(spec.ref_point + d);
  return out;
}

SampleResult sample_multiframe(const SampleSpec& spec, const FeatureBank& bank,
                               const std::vector<CameraModel>& cameras,
                               const std::vector<FramePose>& poses) {
  spec.validate();
  if (poses.empty()) throw std::invalid_argument("sample: no frames");
  if (bank.size() != poses.size()) {
    throw std::invalid_argument("sample: one feature set per frame");
  }
  for (const auto& cam : cameras) cam.validate();
  const std::size_t levels = spec.weights.empty() ? 0 : spec.weights[0].size();
  int channels = -1;
  for (const auto& frame : bank) {
    if (frame.size() != cameras.size()) {
      throw std::invalid_argument("sample: one plane set per camera");
    }
    for (const auto& view : frame) {
      if (view.size() != levels) {
        throw std::invalid_argument("sample: plane levels != weight columns");
      }
      for (const auto& plane : view) {
        plane.validate();
        if (channels < 0) channels = plane.channels;
        if (plane.channels != channels) {
          throw std::invalid_argument("sample: channel count mismatch");
        }
      }
    }
  }
  if (channels < 0) channels = 0;

  const std::vector<Vec3> points = make_sample_points(spec);
  const std::size_t n_s = points.size();
  SampleResult out;
  out.features = Eigen::MatrixXd::Zero(
      static_cast<Eigen::Index>(poses.size() * n_s), channels);
  out.missed.assign(poses.size() * n_s, false);

  for (std::size_t t = 0; t < poses.size(); ++t) {
    for (std::size_t i = 0; i < n_s; ++i) {
      const std::size_t row = t * n_s + i;
      const Vec3 p = poses[t].apply(points[i]);
      Eigen::VectorXd acc = Eigen::VectorXd::Zero(channels);
      int hits = 0;
      for (std::size_t v = 0; v < cameras.size(); ++v) {
        const Projection proj = project(p, cameras[v]);
        if (!proj.hit) continue;
        ++hits;
        for (std::size_t l = 0; l < levels; ++l) {
          const FeaturePlane& plane = bank[t][v][l];
          const double su = proj.u * plane.width / cameras[v].width;
          const double sv = proj.v * plane.height / cameras[v].height;
          acc += spec.weights[i][l] * bilinear(plane, su, sv);
        }
      }
      if (hits == 0) {
        out.missed[row] = true;
        continue;
      }
      out.features.row(static_cast<Eigen::Index>(row)) =
          (acc / static_cast<double>(hits)).transpose();
    }
  }
  return out;
}

}  // namespace squasplat
