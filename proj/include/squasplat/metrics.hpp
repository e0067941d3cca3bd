#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "squasplat/grid.hpp"

namespace squasplat {

struct Counts {
  std::uint64_t tp = 0;
  std::uint64_t fp = 0;
  std::uint64_t fn = 0;

  // tp / (tp + fp + fn), or nullopt when all three are zero.
  std::optional<double> iou() const;
};

struct Confusion {
  std::vector<Counts> per_class;  // one entry per nonempty class
  Counts occupied;                // occupied-vs-empty binarization

  double iou() const;  // 1.0 when neither grid has occupied voxels
  // Mean over classes present in pred or gt; classes absent from both are
  // excluded. 1.0 when every class is absent.
  double miou() const;
};

// Throws std::invalid_argument on a grid spec or class count mismatch.
Confusion confusion(const LabelGrid& pred, const LabelGrid& gt);

struct Ray {
  Vec3 origin = Vec3::Zero();
  Vec3 direction = Vec3::UnitX();  // unit length
};

struct RaySetParams {
  Vec3 origin = Vec3(0.0, 0.0, 1.0);
  int azimuths = 360;
  std::vector<double> elevations_deg = {-10.0, -5.0, 0.0, 5.0, 10.0};
};

struct RaySet {
  RaySetParams params;
  std::vector<Ray> rays;
};

// Rays for every (elevation, azimuth) pair, elevation-major, azimuths evenly
// spaced from 0.
RaySet make_rayset(const RaySetParams& params = {});

struct RayHit {
  double depth = 0.0;  // distance to the entry face of the hit voxel
  std::uint16_t label = kEmptyLabel;
};

// Voxel traversal from the ray origin (or its grid entry point) to the first
// nonempty voxel; nullopt when the ray leaves the grid without a hit.
std::optional<RayHit> cast_ray(const LabelGrid& grid, const Ray& ray);

struct RayIouOptions {
  std::vector<double> thresholds = {1.0, 2.0, 4.0};
  bool class_agnostic = false;
};

struct RayIouResult {
  std::vector<double> thresholds;
  std::vector<double> scores;
  std::vector<Counts> counts;
  double mean = 0.0;
};

// Per threshold d: a ray is TP when both grids hit, classes agree and the
// depth gap is <= d. Otherwise a pred hit counts one FP and a gt hit one FN.
// A threshold with no counts at all scores 1.0. Throws std::invalid_argument
// for an empty ray set.
RayIouResult ray_iou(const LabelGrid& pred, const LabelGrid& gt,
                     const std::vector<Ray>& rays,
                     const RayIouOptions& options = {});

}  // namespace squasplat
