#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include "squasplat/scene.hpp"

namespace squasplat {

using Index3 = std::array<int, 3>;

// Axis-aligned voxel lattice. Linear indices are x-fastest.
struct GridSpec {
  Vec3 lower = Vec3::Zero();
  Vec3 upper = Vec3::Ones();
  Index3 resolution = {1, 1, 1};

  static GridSpec occ3d();        // [-40,40]x[-40,40]x[-1,5.4], 200x200x16
  static GridSpec surround_occ(); // [-50,50]x[-50,50]x[-5,3], 200x200x16

  // Throws std::invalid_argument unless upper > lower and every axis has
  // at least one voxel.
  void validate() const;

  Vec3 voxel_size() const;
  std::size_t voxel_count() const;

  std::size_t linear_index(int i, int j, int k) const {
    return static_cast<std::size_t>(i) +
           static_cast<std::size_t>(resolution[0]) *
               (static_cast<std::size_t>(j) +
                static_cast<std::size_t>(resolution[1]) *
                    static_cast<std::size_t>(k));
  }
  Index3 unravel(std::size_t linear) const;

  Vec3 voxel_center(int i, int j, int k) const;
  Vec3 voxel_center(const Index3& idx) const {
    return voxel_center(idx[0], idx[1], idx[2]);
  }

  // Index of the voxel containing p, or nullopt if p is outside the grid.
  std::optional<Index3> world_to_voxel(const Vec3& p) const;

  bool operator==(const GridSpec& other) const;
};

inline constexpr std::uint16_t kEmptyLabel = 0xFFFF;

// Voxels with p_occ below this are labelled empty.
inline constexpr double kOccupiedThreshold = 0.5;

// Compact per-voxel class ids.
struct LabelGrid {
  GridSpec spec;
  int num_classes = 0;
  std::vector<std::uint16_t> labels;

  LabelGrid() = default;
  LabelGrid(const GridSpec& spec, int num_classes);

  std::uint16_t at(int i, int j, int k) const {
    return labels[spec.linear_index(i, j, k)];
  }
  std::size_t occupied_count() const;
};

// Dense semantic occupancy. `semantics` is either empty (labels only) or
// holds num_classes values per voxel, voxel-major.
struct VoxelGrid {
  GridSpec spec;
  int num_classes = 0;
  std::vector<double> occupancy;
  std::vector<std::uint16_t> labels;
  std::vector<double> semantics;

  VoxelGrid() = default;
  VoxelGrid(const GridSpec& spec, int num_classes, bool with_semantics);

  bool has_semantics() const { return !semantics.empty(); }
  const double* semantics_at(std::size_t voxel) const {
    return semantics.data() + voxel * static_cast<std::size_t>(num_classes);
  }

  LabelGrid label_grid() const;
};

// Argmax class of a voxel or kEmptyLabel when p_occ < kOccupiedThreshold.
// Ties resolve to the lowest class id.
std::uint16_t voxel_label(double p_occ, const double* p_sem, int num_classes);

}  // namespace squasplat
