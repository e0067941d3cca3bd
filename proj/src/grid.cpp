#include "squasplat/grid.hpp"

#include <cmath>
#include <stdexcept>

namespace squasplat {

GridSpec GridSpec::occ3d() {
  return {Vec3(-40.0, -40.0, -1.0), Vec3(40.0, 40.0, 5.4), {200, 200, 16}};
}

GridSpec GridSpec::surround_occ() {
  return {Vec3(-50.0, -50.0, -5.0), Vec3(50.0, 50.0, 3.0), {200, 200, 16}};
}

void GridSpec::validate() const {
  for (int a = 0; a < 3; ++a) {
    if (resolution[a] <= 0) {
      throw std::invalid_argument("grid spec: resolution must be positive");
    }
    if (!std::isfinite(lower[a]) || !std::isfinite(upper[a]) ||
        !(upper[a] > lower[a])) {
      throw std::invalid_argument("grid spec: upper bound must exceed lower");
    }
  }
}

Vec3 GridSpec::voxel_size() const {
  return Vec3((upper[0] - lower[0]) / resolution[0],
              (upper[1] - lower[1]) / resolution[1],
              (upper[2] - lower[2]) / resolution[2]);
}

std::size_t GridSpec::voxel_count() const {
  return static_cast<std::size_t>(resolution[0]) *
         static_cast<std::size_t>(resolution[1]) *
         static_cast<std::size_t>(resolution[2]);
}

Index3 GridSpec::unravel(std::size_t linear) const {
  const auto nx = static_cast<std::size_t>(resolution[0]);
  const auto ny = static_cast<std::size_t>(resolution[1]);
  return {static_cast<int>(linear % nx), static_cast<int>((linear / nx) % ny),
          static_cast<int>(linear / (nx * ny))};
}

Vec3 GridSpec::voxel_center(int i, int j, int k) const {
  const Vec3 size = voxel_size();
  return Vec3(lower[0] + (i + 0.5) * size[0], lower[1] + (j + 0.5) * size[1],
              lower[2] + (k + 0.5) * size[2]);
}

std::optional<Index3> GridSpec::world_to_voxel(const Vec3& p) const {
  const Vec3 size = voxel_size();
  Index3 idx{};
  for (int a = 0; a < 3; ++a) {
    const double u = std::floor((p[a] - lower[a]) / size[a]);
    if (!(u >= 0.0 && u < resolution[a])) return std::nullopt;
    idx[a] = static_cast<int>(u);
  }
  return idx;
}

bool GridSpec::operator==(const GridSpec& other) const {
  return lower == other.lower && upper == other.upper &&
         resolution == other.resolution;
}

LabelGrid::LabelGrid(const GridSpec& s, int c)
    : spec(s), num_classes(c), labels(s.voxel_count(), kEmptyLabel) {}

std::size_t LabelGrid::occupied_count() const {
  std::size_t n = 0;
  for (auto l : labels) n += (l != kEmptyLabel);
  return n;
}

VoxelGrid::VoxelGrid(const GridSpec& s, int c, bool with_semantics)
    : spec(s),
      num_classes(c),
      occupancy(s.voxel_count(), 0.0),
      labels(s.voxel_count(), kEmptyLabel) {
  if (with_semantics) {
    semantics.assign(s.voxel_count() * static_cast<std::size_t>(c),
                     c > 0 ? 1.0 / c : 0.0);
  }
}

LabelGrid VoxelGrid::label_grid() const {
  LabelGrid out;
  out.spec = spec;
  out.num_classes = num_classes;
  out.labels = labels;
  return out;
}

std::uint16_t voxel_label(double p_occ, const double* p_sem, int num_classes) {
  if (p_occ < kOccupiedThreshold || num_classes <= 0) return kEmptyLabel;
  int best = 0;
  for (int c = 1; c < num_classes; ++c) {
    if (p_sem[c] > p_sem[best]) best = c;
  }
  return static_cast<std::uint16_t>(best);
}

}  // namespace squasplat
