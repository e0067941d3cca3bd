#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "squasplat/field.hpp"
#include "squasplat/grid.hpp"

namespace squasplat {

struct SplatOptions {
  int tile_size = 4;
  bool keep_semantics = true;
  int workers = 0;  // 0: default worker count
};

struct TilePair {
  std::uint32_t tile = 0;
  std::uint32_t primitive = 0;

  auto operator<=>(const TilePair&) const = default;
};

// (tile, primitive) overlap pairs sorted lexicographically, with per-tile
// ranges [offsets[t], offsets[t + 1]).
struct TilePairTable {
  int tile_size = 4;
  Index3 tiles = {0, 0, 0};
  std::vector<TilePair> pairs;
  std::vector<std::size_t> offsets;

  std::size_t tile_count() const {
    return static_cast<std::size_t>(tiles[0]) * tiles[1] * tiles[2];
  }
  std::span<const TilePair> tile(std::size_t t) const {
    return std::span<const TilePair>(pairs).subspan(
        offsets[t], offsets[t + 1] - offsets[t]);
  }
  // Voxel index box [first, last] covered by tile t, clamped to the grid.
  void tile_voxels(std::size_t t, const GridSpec& spec, Index3& first,
                   Index3& last) const;
};

// Inclusive range of voxel indices along `axis` whose centers lie inside
// [lo, hi]; empty when first > last.
struct AxisRange {
  int first = 0;
  int last = -1;
  bool empty() const { return first > last; }
};
AxisRange covered_voxels(const GridSpec& spec, int axis, double lo, double hi);

TilePairTable build_tile_table(std::span<const PreparedPrimitive> prims,
                               const GridSpec& spec, int tile_size);
TilePairTable build_tile_table(std::span<const Superquadric> scene,
                               const GridSpec& spec, const FieldConfig& cfg,
                               int tile_size);

// Reference splatter: every voxel scans every primitive.
VoxelGrid splat_naive(std::span<const Superquadric> scene, int num_classes,
                      const GridSpec& spec, const FieldConfig& cfg,
                      const SplatOptions& options = {});

// Tile-binned splatter. Bit-identical to splat_naive.
VoxelGrid splat_tiled(std::span<const Superquadric> scene, int num_classes,
                      const GridSpec& spec, const FieldConfig& cfg,
                      const SplatOptions& options = {});

// Exact equality of occupancy, labels and semantics.
bool grids_identical(const VoxelGrid& a, const VoxelGrid& b);

struct BenchPath {
  double median_ms = 0.0;
  std::vector<double> samples_ms;
};

struct BenchReport {
  int tile_size = 4;
  int repeats = 0;
  std::size_t primitives = 0;
  BenchPath naive;
  BenchPath tiled;
  std::size_t voxel_pairs = 0;  // pair count at tile size 1
  std::size_t tile_pairs = 0;   // pair count at the benchmarked tile size
  double speedup = 0.0;         // naive median / tiled median
  bool outputs_identical = true;
};

// Times both splatters `repeats` times (>= 3) and re-checks their outputs
// are identical on every repeat.
BenchReport bench_splat(std::span<const Superquadric> scene, int num_classes,
                        const GridSpec& spec, const FieldConfig& cfg,
                        int repeats, const SplatOptions& options = {});

}  // namespace squasplat
