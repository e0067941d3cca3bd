#include "squasplat/splat.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <stdexcept>

#include "squasplat/parallel.hpp"

namespace squasplat {
namespace {

void check_inputs(std::span<const Superquadric> scene, int num_classes,
                  const GridSpec& spec, const FieldConfig& cfg) {
  spec.validate();
  cfg.validate();
  if (num_classes <= 0 || num_classes >= kEmptyLabel) {
    throw std::invalid_argument("splat: class count out of range");
  }
  for (const auto& sq : scene) {
    if (sq.num_classes() != num_classes) {
      throw std::invalid_argument("splat: primitive class count mismatch");
    }
  }
}

void store_voxel(VoxelGrid& grid, std::size_t voxel,
                 const PointAccumulator& acc, std::vector<double>& p_sem) {
  acc.semantics(p_sem.data());
  const double p_occ = acc.occupancy();
  grid.occupancy[voxel] = p_occ;
  grid.labels[voxel] = voxel_label(p_occ, p_sem.data(), grid.num_classes);
  if (grid.has_semantics()) {
    std::copy(p_sem.begin(), p_sem.end(),
              grid.semantics.begin() +
                  static_cast<std::ptrdiff_t>(voxel * grid.num_classes));
  }
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

AxisRange covered_voxels(const GridSpec& spec, int axis, double lo, double hi) {
  const int n = spec.resolution[axis];
  const double origin = spec.lower[axis];
  const double size = (spec.upper[axis] - spec.lower[axis]) / n;
  auto center = [&](int i) { return origin + (i + 0.5) * size; };

  // Estimate by division, then settle boundary voxels with the same center
  // arithmetic the splatters use.
  const double a = std::clamp(std::ceil((lo - origin) / size - 0.5), 0.0,
                              static_cast<double>(n));
  const double b = std::clamp(std::floor((hi - origin) / size - 0.5), -1.0,
                              static_cast<double>(n - 1));
  AxisRange r{static_cast<int>(a), static_cast<int>(b)};
  while (r.first > 0 && center(r.first - 1) >= lo) --r.first;
  while (r.first < n && center(r.first) < lo) ++r.first;
  while (r.last < n - 1 && center(r.last + 1) <= hi) ++r.last;
  while (r.last >= 0 && center(r.last) > hi) --r.last;
  return r;
}

void TilePairTable::tile_voxels(std::size_t t, const GridSpec& spec,
                                Index3& first, Index3& last) const {
  const auto tx = static_cast<std::size_t>(tiles[0]);
  const auto ty = static_cast<std::size_t>(tiles[1]);
  const Index3 tile_idx = {static_cast<int>(t % tx),
                           static_cast<int>((t / tx) % ty),
                           static_cast<int>(t / (tx * ty))};
  for (int a = 0; a < 3; ++a) {
    first[a] = tile_idx[a] * tile_size;
    last[a] = std::min(first[a] + tile_size, spec.resolution[a]) - 1;
  }
}

TilePairTable build_tile_table(std::span<const PreparedPrimitive> prims,
                               const GridSpec& spec, int tile_size) {
  spec.validate();
  if (tile_size < 1) throw std::invalid_argument("tile size must be >= 1");
  TilePairTable table;
  table.tile_size = tile_size;
  for (int a = 0; a < 3; ++a) {
    table.tiles[a] = (spec.resolution[a] + tile_size - 1) / tile_size;
  }
  const std::size_t n_tiles = table.tile_count();

  // Tile box per primitive; empty boxes have first > last on some axis.
  std::vector<std::array<AxisRange, 3>> boxes(prims.size());
  std::vector<std::size_t> counts(n_tiles + 1, 0);
  for (std::size_t p = 0; p < prims.size(); ++p) {
    auto& box = boxes[p];
    bool empty = false;
    for (int a = 0; a < 3; ++a) {
      const AxisRange v = covered_voxels(spec, a, prims[p].bounds.min[a],
                                         prims[p].bounds.max[a]);
      if (v.empty()) {
        empty = true;
        break;
      }
      box[a] = {v.first / tile_size, v.last / tile_size};
    }
    if (empty) {
      box[0] = AxisRange{};
      continue;
    }
    for (int k = box[2].first; k <= box[2].last; ++k)
      for (int j = box[1].first; j <= box[1].last; ++j)
        for (int i = box[0].first; i <= box[0].last; ++i)
          ++counts[i + table.tiles[0] * (j + static_cast<std::size_t>(
                                                 table.tiles[1]) * k)];
  }

  // Counting sort keyed on tile; visiting primitives in ascending order keeps
  // each tile's run sorted by primitive id.
  table.offsets.assign(n_tiles + 1, 0);
  for (std::size_t t = 0; t < n_tiles; ++t) {
    table.offsets[t + 1] = table.offsets[t] + counts[t];
  }
  table.pairs.resize(table.offsets[n_tiles]);
  std::vector<std::size_t> cursor(table.offsets.begin(),
                                  table.offsets.end() - 1);
  for (std::size_t p = 0; p < prims.size(); ++p) {
    const auto& box = boxes[p];
    if (box[0].empty()) continue;
    for (int k = box[2].first; k <= box[2].last; ++k)
      for (int j = box[1].first; j <= box[1].last; ++j)
        for (int i = box[0].first; i <= box[0].last; ++i) {
          const std::size_t t =
              i + table.tiles[0] *
                      (j + static_cast<std::size_t>(table.tiles[1]) * k);
          table.pairs[cursor[t]++] = {static_cast<std::uint32_t>(t),
                                      static_cast<std::uint32_t>(p)};
        }
  }
  return table;
}

TilePairTable build_tile_table(std::span<const Superquadric> scene,
                               const GridSpec& spec, const FieldConfig& cfg,
                               int tile_size) {
  cfg.validate();
  const auto prims = prepare_all(scene, cfg);
  return build_tile_table(prims, spec, tile_size);
}

VoxelGrid splat_naive(std::span<const Superquadric> scene, int num_classes,
                      const GridSpec& spec, const FieldConfig& cfg,
                      const SplatOptions& options) {
  check_inputs(scene, num_classes, spec, cfg);
  const auto prims = prepare_all(scene, cfg);
  VoxelGrid grid(spec, num_classes, options.keep_semantics);
  const int nx = spec.resolution[0];
  const int ny = spec.resolution[1];
  const std::size_t rows = static_cast<std::size_t>(ny) * spec.resolution[2];

  parallel_for(rows, options.workers, [&](std::size_t row) {
    const int j = static_cast<int>(row % ny);
    const int k = static_cast<int>(row / ny);
    PointAccumulator acc(num_classes);
    std::vector<double> p_sem(static_cast<std::size_t>(num_classes));
    for (int i = 0; i < nx; ++i) {
      const Vec3 p = spec.voxel_center(i, j, k);
      acc.reset();
      for (const auto& prim : prims) {
        const double v = contribution(prim, p, cfg);
        if (v > 0.0) acc.add(v, prim);
      }
      store_voxel(grid, spec.linear_index(i, j, k), acc, p_sem);
    }
  });
  return grid;
}

VoxelGrid splat_tiled(std::span<const Superquadric> scene, int num_classes,
                      const GridSpec& spec, const FieldConfig& cfg,
                      const SplatOptions& options) {
  check_inputs(scene, num_classes, spec, cfg);
  const auto prims = prepare_all(scene, cfg);
  const TilePairTable table = build_tile_table(prims, spec, options.tile_size);
  VoxelGrid grid(spec, num_classes, options.keep_semantics);

  parallel_for(table.tile_count(), options.workers, [&](std::size_t t) {
    const auto pairs = table.tile(t);
    Index3 first, last;
    table.tile_voxels(t, spec, first, last);
    // One gather per tile, reused by every voxel in it.
    std::vector<PreparedPrimitive> local;
    local.reserve(pairs.size());
    for (const TilePair& pair : pairs) local.push_back(prims[pair.primitive]);

    PointAccumulator acc(num_classes);
    std::vector<double> p_sem(static_cast<std::size_t>(num_classes));
    for (int k = first[2]; k <= last[2]; ++k)
      for (int j = first[1]; j <= last[1]; ++j)
        for (int i = first[0]; i <= last[0]; ++i) {
          const Vec3 p = spec.voxel_center(i, j, k);
          acc.reset();
          for (const auto& prim : local) {
            const double v = contribution(prim, p, cfg);
            if (v > 0.0) acc.add(v, prim);
          }
          store_voxel(grid, spec.linear_index(i, j, k), acc, p_sem);
        }
  });
  return grid;
}

bool grids_identical(const VoxelGrid& a, const VoxelGrid& b) {
  return a.spec == b.spec && a.num_classes == b.num_classes &&
         a.occupancy == b.occupancy && a.labels == b.labels &&
         a.semantics == b.semantics;
}

BenchReport bench_splat(std::span<const Superquadric> scene, int num_classes,
                        const GridSpec& spec, const FieldConfig& cfg,
                        int repeats, const SplatOptions& options) {
  if (repeats < 3) throw std::invalid_argument("bench: repeats must be >= 3");
  using Clock = std::chrono::steady_clock;
  auto elapsed_ms = [](Clock::time_point a, Clock::time_point b) {
    return std::chrono::duration<double, std::milli>(b - a).count();
  };

  BenchReport report;
  report.tile_size = options.tile_size;
  report.repeats = repeats;
  report.primitives = scene.size();
  for (int r = 0; r < repeats; ++r) {
    const auto t0 = Clock::now();
    const VoxelGrid naive = splat_naive(scene, num_classes, spec, cfg, options);
    const auto t1 = Clock::now();
    const VoxelGrid tiled = splat_tiled(scene, num_classes, spec, cfg, options);
    const auto t2 = Clock::now();
    report.naive.samples_ms.push_back(elapsed_ms(t0, t1));
    report.tiled.samples_ms.push_back(elapsed_ms(t1, t2));
    report.outputs_identical =
        report.outputs_identical && grids_identical(naive, tiled);
  }
  report.naive.median_ms = median(report.naive.samples_ms);
  report.tiled.median_ms = median(report.tiled.samples_ms);
  report.speedup = report.naive.median_ms / report.tiled.median_ms;

  const auto prims = prepare_all(scene, cfg);
  report.voxel_pairs = build_tile_table(prims, spec, 1).pairs.size();
  report.tile_pairs = build_tile_table(prims, spec, options.tile_size).pairs.size();
  return report;
}

}  // namespace squasplat
